#pragma once

#include <cstddef>
#include <map>
#include <vector>

namespace satmle {

/// One unit: covariates, treatment, surrogate, observation indicator and
/// (when observed) the long-term outcome.  y is meaningful only when
/// delta == 1 and is stored as 0 otherwise.
struct ObservationRecord {
    int cluster_id = 0;
    double w1 = 0.0;
    int w2 = 0;      // {0,1}
    double w3 = 0.0; // [0,1]
    int a = 0;       // {0,1}
    double s = 0.0;
    int delta = 0;   // {0,1}
    double y = 0.0;  // valid iff delta == 1
};

struct Dataset {
    std::vector<ObservationRecord> records;
    // cluster id -> record positions; ordered so iteration is deterministic
    std::map<int, std::vector<std::size_t>> cluster_index;

    void rebuild_index() {
        cluster_index.clear();
        for (std::size_t i = 0; i < records.size(); ++i) {
            cluster_index[records[i].cluster_id].push_back(i);
        }
    }

    std::size_t size() const { return records.size(); }
    std::size_t n_clusters() const { return cluster_index.size(); }

    std::vector<int> cluster_ids() const {
        std::vector<int> ids;
        ids.reserve(cluster_index.size());
        for (const auto& [id, rows] : cluster_index) ids.push_back(id);
        return ids;
    }

    Dataset without_cluster(int cluster_id) const {
        Dataset out;
        out.records.reserve(records.size());
        for (const auto& r : records) {
            if (r.cluster_id != cluster_id) out.records.push_back(r);
        }
        out.rebuild_index();
        return out;
    }
};

} // namespace satmle

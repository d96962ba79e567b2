#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "promptopt/backend.hpp"
#include "promptopt/templates.hpp"
#include "promptopt/types.hpp"

namespace promptopt {

/// Clusters in creation order; ids ("Cluster1", "Cluster2", ...) are handed
/// out once and never reassigned, so they stay stable across batches.
class ClusterCatalog {
public:
    const std::vector<Cluster>& clusters() const { return clusters_; }
    bool empty() const { return clusters_.empty(); }
    std::size_t size() const { return clusters_.size(); }

    /// Appends a cluster (unless an equivalent description exists) and
    /// returns its id.
    std::string add(const std::string& description);

    /// Lookup by "ClusterN" id, exact description or description prefix,
    /// case-insensitive.
    const Cluster* find(const std::string& id_or_description) const;

    /// "Cluster1: <desc>" lines, one per cluster.
    std::string render_block() const;

private:
    std::vector<Cluster> clusters_;
};

struct Assignment {
    std::string feedback_id;
    std::string cluster_id;
    std::string source;
};

struct ClusterRun {
    ClusterCatalog catalog;
    std::vector<Assignment> assignments;
    std::vector<std::string> unassigned;  // feedback ids the judge never pinned down
    int judge_calls = 0;
};

/// Batched LLM-judge clustering. Feedbacks from all sources are interleaved
/// round-robin (sources in sorted order) into one stream; each batch renders
/// the clustering prompt with the catalog as it stands and commits the
/// parsed assignments before the next batch. A malformed batch response is
/// re-queried once; feedbacks still unparseable end up in `unassigned`.
ClusterRun cluster_feedbacks(const std::vector<Feedback>& feedbacks, int batch_size,
                             Backend& judge, const TemplateLibrary& templates,
                             ClusterCatalog initial = {});

struct DistributionRow {
    std::string source;
    std::string cluster;  // cluster id or "Specific"
    double proportion = 0.0;
};

/// Per-source cluster proportions. With two or more sources, clusters
/// assigned in only one source fold into that source's "Specific" bucket.
std::vector<DistributionRow> distribution(const std::vector<Assignment>& assignments,
                                          const ClusterCatalog& catalog);

/// Average Step Repetition Rate at step t: the fraction of step-t feedbacks
/// whose cluster already appeared among the feedbacks of the prompt's
/// ancestor chain at earlier steps. Absent when step t has no feedbacks.
std::optional<double> asrr(const RunTrace& trace,
                           const std::vector<Assignment>& assignments, int step);

}  // namespace promptopt

#pragma once

#include <vector>

#include "mrn/relation.hpp"

namespace mrn {

// Class centroids over post-propagation support embeddings.
struct CentroidSet {
    Tensor centroids;  // C x d
    Dim num_classes() const { return centroids.dim(0); }
};

// Mean of the K support embeddings per episode-local class 0..C-1.
// `labels` holds one episode-local label per support row.
CentroidSet class_centroids(const Tensor& support_features, const std::vector<int>& labels, int num_classes);

// Mean over queries of -log softmax(-D)[y] given a precomputed Q x C
// distance matrix. Differentiable through the distances.
Tensor episode_loss_from_distances(const Tensor& distances, const std::vector<int>& query_labels);

// Full route: distances from queries to centroids under the classifier
// metric, then the cross-entropy above.
Tensor episode_loss(const Tensor& query_features, const std::vector<int>& query_labels,
                    const CentroidSet& centroids, MetricKind metric, RelationParams* params,
                    bool training = false);

// argmin_t D(f_i, c_t); ties broken by lowest class index.
std::vector<int> predict_from_distances(const Tensor& distances);
std::vector<int> predict(const Tensor& query_features, const CentroidSet& centroids, MetricKind metric,
                         RelationParams* params, bool training = false);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

}  // namespace mrn

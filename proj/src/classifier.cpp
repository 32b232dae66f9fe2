#include "mrn/classifier.hpp"

namespace mrn {

CentroidSet class_centroids(const Tensor& support_features, const std::vector<int>& labels, int num_classes) {
    if (support_features.rank() != 2) {
        throw UsageError("class_centroids: features must be n x d");
    }
    if (static_cast<Dim>(labels.size()) != support_features.dim(0)) {
        throw UsageError("class_centroids: one label per support row required");
    }
    if (num_classes < 1) throw UsageError("class_centroids: need at least one class");

    std::vector<std::vector<int>> members(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw UsageError("class_centroids: label " + std::to_string(labels[i]) + " outside 0.." +
                             std::to_string(num_classes - 1));
        }
        members[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));
    }

    const Dim n = support_features.dim(0);
    std::vector<double> mix(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(n), 0.0);
    for (int t = 0; t < num_classes; ++t) {
        const auto& rows = members[static_cast<std::size_t>(t)];
        if (rows.empty()) {
            throw UsageError("class_centroids: class " + std::to_string(t) + " has no support instances");
        }
        const double w = 1.0 / static_cast<double>(rows.size());
        for (int r : rows) mix[static_cast<std::size_t>(t) * static_cast<std::size_t>(n) + static_cast<std::size_t>(r)] = w;
    }
    CentroidSet set;
    set.centroids = ops::matmul(Tensor(Shape{num_classes, n}, std::move(mix)), support_features);
    return set;
}

Tensor episode_loss_from_distances(const Tensor& distances, const std::vector<int>& query_labels) {
    if (distances.rank() != 2) throw UsageError("episode_loss: distances must be Q x C");
    const Dim q = distances.dim(0), c = distances.dim(1);
    if (q < 1) throw UsageError("episode_loss: no queries");
    if (c < 2) throw UsageError("episode_loss: need at least two classes");
    if (static_cast<Dim>(query_labels.size()) != q) {
        throw UsageError("episode_loss: one label per query required");
    }
    for (int y : query_labels) {
        if (y < 0 || y >= c) {
            throw UsageError("episode_loss: label " + std::to_string(y) + " outside 0.." +
                             std::to_string(c - 1));
        }
    }
    Tensor log_probs = ops::log_softmax_rows(ops::neg(distances));
    Tensor picked = ops::pick_per_row(log_probs, query_labels);
    return ops::neg(ops::mean_all(picked));
}

Tensor episode_loss(const Tensor& query_features, const std::vector<int>& query_labels,
                    const CentroidSet& centroids, MetricKind metric, RelationParams* params,
                    bool training) {
    Tensor distances = distance_matrix(query_features, centroids.centroids, metric, params, training);
    return episode_loss_from_distances(distances, query_labels);
}

std::vector<int> predict_from_distances(const Tensor& distances) {
    if (distances.rank() != 2) throw UsageError("predict: distances must be Q x C");
    const Dim q = distances.dim(0), c = distances.dim(1);
    const auto& dd = distances.data();
    std::vector<int> out(static_cast<std::size_t>(q));
    for (Dim i = 0; i < q; ++i) {
        int best = 0;
        double best_d = dd[static_cast<std::size_t>(i * c)];
        for (Dim t = 1; t < c; ++t) {
            const double d = dd[static_cast<std::size_t>(i * c + t)];
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(t);
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

std::vector<int> predict(const Tensor& query_features, const CentroidSet& centroids, MetricKind metric,
                         RelationParams* params, bool training) {
    NoGradGuard no_grad;
    Tensor distances = distance_matrix(query_features, centroids.centroids, metric, params, training);
    return predict_from_distances(distances);
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw UsageError("accuracy: prediction/label size mismatch");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

}  // namespace mrn

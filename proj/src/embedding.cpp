#include "doctorrag/embedding.hpp"

#include <cmath>
#include <string>

#include "doctorrag/error.hpp"

namespace doctorrag {

EmbeddingVector::EmbeddingVector(std::vector<float> values)
    : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw InputError("embedding component " + std::to_string(i) +
                             " is not finite");
        }
    }
}

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (float v : values_) {
        sum += static_cast<double>(v) * static_cast<double>(v);
    }
    return std::sqrt(sum);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw InputError("cosine similarity dimension mismatch: " +
                         std::to_string(a.dimension()) + " vs " +
                         std::to_string(b.dimension()));
    }
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    const auto& va = a.values();
    const auto& vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) {
        double x = static_cast<double>(va[i]);
        double y = static_cast<double>(vb[i]);
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw ScoreError("cosine similarity undefined for zero-norm vector");
    }
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

} // namespace doctorrag

#pragma once

#include <cstddef>
#include <vector>

namespace doctorrag {

// Fixed-dimension dense vector; every component must be finite.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    // Throws InputError when any component is NaN or infinite.
    explicit EmbeddingVector(std::vector<float> values);

    const std::vector<float>& values() const noexcept { return values_; }
    std::size_t dimension() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }
    double norm() const;

    bool operator==(const EmbeddingVector& other) const = default;

private:
    std::vector<float> values_;
};

// Cosine similarity computed in double precision.
// Throws ScoreError when either vector has zero norm, and InputError on
// mismatched dimensions.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

} // namespace doctorrag

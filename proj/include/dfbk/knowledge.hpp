#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dfbk/common.hpp"

namespace dfbk {

// L x D sequence of unit-norm knowledge vectors consumed by the knowledge
// guidance block. Values are float32 to match the on-disk format exactly.
struct TextEmbedding {
    int tokens = 0;
    int dim = 0;
    std::vector<float> v;  // row-major L x D

    float& at(int l, int d) { return v[static_cast<size_t>(l) * dim + d]; }
    const float& at(int l, int d) const { return v[static_cast<size_t>(l) * dim + d]; }

    template <typename T>
    Mat<T> to_mat() const {
        Mat<T> m(tokens, dim);
        for (size_t i = 0; i < v.size(); ++i) m.v[i] = static_cast<T>(v[i]);
        return m;
    }
};

// Deterministic stand-in for a pretrained text encoder: each row is drawn
// from a stream seeded by a stable hash of (prompt, row index) and
// unit-normalized, so the same prompt maps to the same matrix on every run
// and platform.
TextEmbedding synthetic_embedding(const std::string& prompt, int tokens, int dim);

// Little-endian binary container: magic "DFBKEMB1", uint32 L, uint32 D,
// then L*D float32 row-major.
void save_embeddings(const std::filesystem::path& path, const TextEmbedding& e);

// Loads and validates an embedding file. Rows that are finite but not
// unit-norm are renormalized; if `warning` is non-null a description is
// appended there. Structural problems raise FormatError naming the byte
// offset.
TextEmbedding load_embeddings(const std::filesystem::path& path, std::string* warning = nullptr);

// Source-agnostic access used by the pipeline: the guidance block only ever
// sees the L x D values.
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual TextEmbedding get(const std::string& prompt) const = 0;
};

class SyntheticEmbeddingProvider final : public EmbeddingProvider {
  public:
    SyntheticEmbeddingProvider(int tokens, int dim) : tokens_(tokens), dim_(dim) {}
    TextEmbedding get(const std::string& prompt) const override {
        return synthetic_embedding(prompt, tokens_, dim_);
    }

  private:
    int tokens_, dim_;
};

// Serves one precomputed embedding for every prompt.
class FileEmbeddingProvider final : public EmbeddingProvider {
  public:
    explicit FileEmbeddingProvider(const std::filesystem::path& path)
        : embedding_(load_embeddings(path)) {}
    TextEmbedding get(const std::string&) const override { return embedding_; }

  private:
    TextEmbedding embedding_;
};

}  // namespace dfbk

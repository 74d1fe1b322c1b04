#include "dfbk/knowledge.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "dfbk/rng.hpp"

namespace dfbk {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'B', 'K', 'E', 'M', 'B', '1'};

void write_u32(std::ostream& os, uint32_t x) {
    unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                          static_cast<unsigned char>(x >> 16),
                          static_cast<unsigned char>(x >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

TextEmbedding synthetic_embedding(const std::string& prompt, int tokens, int dim) {
    if (prompt.empty()) throw ValidationError("synthetic_embedding: empty prompt");
    if (tokens < 1 || dim < 1)
        throw ValidationError("synthetic_embedding: tokens and dim must be >= 1");

    TextEmbedding e;
    e.tokens = tokens;
    e.dim = dim;
    e.v.resize(static_cast<size_t>(tokens) * dim);
    const uint64_t prompt_hash = hash64(prompt);
    for (int l = 0; l < tokens; ++l) {
        RandomStream row_rng(combine_seed(prompt_hash, static_cast<uint64_t>(l)));
        double norm_sq = 0.0;
        for (int d = 0; d < dim; ++d) {
            const float x = static_cast<float>(row_rng.uniform_signed());
            e.at(l, d) = x;
            norm_sq += static_cast<double>(x) * x;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12) {
            e.at(l, 0) = 1.0f;  // all-zero row is astronomically unlikely but handled
        } else {
            for (int d = 0; d < dim; ++d)
                e.at(l, d) = static_cast<float>(e.at(l, d) / norm);
        }
    }
    return e;
}

void save_embeddings(const std::filesystem::path& path, const TextEmbedding& e) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_embeddings: cannot open " + path.string());
    os.write(kMagic, 8);
    write_u32(os, static_cast<uint32_t>(e.tokens));
    write_u32(os, static_cast<uint32_t>(e.dim));
    os.write(reinterpret_cast<const char*>(e.v.data()),
             static_cast<std::streamsize>(e.v.size() * sizeof(float)));
    if (!os) throw std::runtime_error("save_embeddings: write failed for " + path.string());
}

TextEmbedding load_embeddings(const std::filesystem::path& path, std::string* warning) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_embeddings: cannot open " + path.string());

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError("load_embeddings: bad magic at byte offset 0 in " + path.string());

    const uint32_t tokens = read_u32(is);
    const uint32_t dim = read_u32(is);
    if (!is) throw FormatError("load_embeddings: truncated header at byte offset 8");
    if (tokens < 1 || dim < 1)
        throw FormatError("load_embeddings: invalid dimensions " + std::to_string(tokens) + "x" +
                          std::to_string(dim) + " at byte offset 8");

    TextEmbedding e;
    e.tokens = static_cast<int>(tokens);
    e.dim = static_cast<int>(dim);
    e.v.resize(static_cast<size_t>(tokens) * dim);
    is.read(reinterpret_cast<char*>(e.v.data()),
            static_cast<std::streamsize>(e.v.size() * sizeof(float)));
    if (static_cast<size_t>(is.gcount()) != e.v.size() * sizeof(float))
        throw FormatError("load_embeddings: truncated data at byte offset " +
                          std::to_string(16 + is.gcount()) + " (expected " +
                          std::to_string(16 + e.v.size() * sizeof(float)) + " bytes)");

    for (int l = 0; l < e.tokens; ++l) {
        double norm_sq = 0.0;
        for (int d = 0; d < e.dim; ++d) {
            const float x = e.at(l, d);
            if (!std::isfinite(x))
                throw FormatError("load_embeddings: non-finite value at byte offset " +
                                  std::to_string(16 + (static_cast<size_t>(l) * e.dim + d) *
                                                          sizeof(float)));
            norm_sq += static_cast<double>(x) * x;
        }
        const double norm = std::sqrt(norm_sq);
        if (norm < 1e-12)
            throw FormatError("load_embeddings: zero row " + std::to_string(l) +
                              " at byte offset " +
                              std::to_string(16 + static_cast<size_t>(l) * e.dim * sizeof(float)));
        if (std::abs(norm - 1.0) > 1e-4) {
            if (warning)
                *warning += "row " + std::to_string(l) + " had norm " + std::to_string(norm) +
                            "; renormalized\n";
            for (int d = 0; d < e.dim; ++d)
                e.at(l, d) = static_cast<float>(e.at(l, d) / norm);
        }
    }
    return e;
}

}  // namespace dfbk

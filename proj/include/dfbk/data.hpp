#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfbk/common.hpp"

namespace dfbk {

// One co-registered pair: target-modality image, source-modality image,
// the shared anatomy support, and the conditioning prompt.
struct PairedSample {
    FeatureMap target;        // values in [0,1]
    FeatureMap source;        // values in [0,1]
    FeatureMap anatomy_mask;  // binary {0,1}
    std::string prompt;
    std::string id;
};

enum class ModalityPair { T1ToT2, FlairToDwi, CtToMr };

std::string modality_pair_name(ModalityPair p);
ModalityPair modality_pair_from_name(const std::string& name);
std::string default_prompt(ModalityPair p);

struct DatasetSpec {
    int n_train = 160;
    int n_val = 40;
    int image_size = 32;  // even
    uint64_t seed = 0;
    ModalityPair modality_pair = ModalityPair::T1ToT2;
};

struct Dataset {
    std::vector<PairedSample> samples;
};

// Renders one synthetic pair: a shared anatomy (skull ring, tissue
// interior, up to two lesion blobs, all soft-edged ellipses) pushed through
// two modality transfer functions plus mild per-modality bias fields.
// Deterministic in the seed.
PairedSample generate_phantom_pair(uint64_t seed, const DatasetSpec& spec);

// Fixed-size dataset of n_train + n_val samples grouped four slices per
// subject, ids "sNNNN_SS".
Dataset generate_phantom_dataset(const DatasetSpec& spec);

// Reads <id>_src.png / <id>_tgt.png pairs (8-bit grayscale) and an
// optional prompts.txt with "id<TAB>prompt" lines.
Dataset load_paired_dir(const std::filesystem::path& dir);

// Writes the dataset in the same layout load_paired_dir reads.
void export_paired_dir(const std::filesystem::path& dir, const Dataset& ds);

// Seeded shuffle of subject groups (id prefix before the first '_');
// subjects never straddle the split.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, uint64_t seed, double train_fraction);

}  // namespace dfbk

#ifndef SEGTRUS_DATASET_HPP_
#define SEGTRUS_DATASET_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "segtrus/netpbm.hpp"
#include "segtrus/rng.hpp"

namespace segtrus {

// Grayscale image in [0,1] paired with its binary ground-truth mask.
struct Sample {
  Image2D image;
  Image2D mask;
  std::string id;
};

enum class Split { train, test };

struct Dataset {
  std::vector<Sample> samples;
  std::vector<Split> split;  // parallel to samples; empty until assigned

  bool has_split() const { return split.size() == samples.size() && !samples.empty(); }
  std::vector<std::size_t> indices_of(Split s) const;
};

// Uniform shuffle, first 90% train, rest test. Needs >= 10 samples.
void split_dataset(Dataset& ds, Rng& rng);

// Pairs img_{id}.pgm / msk_{id}.pgm, sorted by id. Unpaired or
// dimension-mismatched files are errors naming the id.
Dataset load_dataset(const std::filesystem::path& dir);

// manifest.csv with header "id,split".
void save_manifest(const Dataset& ds, const std::filesystem::path& path);
void apply_manifest(Dataset& ds, const std::filesystem::path& path);

}  // namespace segtrus

#endif  // SEGTRUS_DATASET_HPP_

#include "segtrus/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "segtrus/errors.hpp"

namespace segtrus {

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(i);
  }
  return out;
}

void split_dataset(Dataset& ds, Rng& rng) {
  const std::size_t n = ds.samples.size();
  if (n < 10) {
    throw UsageError("split_dataset: need >= 10 samples, have " +
                     std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  shuffle(order, rng);
  const std::size_t n_train =
      static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(n)));
  ds.split.assign(n, Split::test);
  for (std::size_t i = 0; i < n_train; ++i) ds.split[order[i]] = Split::train;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw FormatError("load_dataset: '" + dir.string() +
                      "' is not a directory");
  }
  std::map<std::string, std::pair<bool, bool>> seen;  // id -> (img, msk)
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!name.ends_with(".pgm")) continue;
    const std::string stem = name.substr(0, name.size() - 4);
    if (stem.starts_with("img_")) {
      seen[stem.substr(4)].first = true;
    } else if (stem.starts_with("msk_")) {
      seen[stem.substr(4)].second = true;
    }
  }
  Dataset ds;
  for (const auto& [id, present] : seen) {
    if (!present.first || !present.second) {
      throw FormatError("load_dataset: sample '" + id + "' is missing its " +
                        (present.first ? "msk" : "img") + " file");
    }
    Sample s;
    s.id = id;
    s.image = read_pgm(dir / ("img_" + id + ".pgm"));
    const Image2D raw_mask = read_pgm(dir / ("msk_" + id + ".pgm"));
    if (raw_mask.h != s.image.h || raw_mask.w != s.image.w) {
      throw FormatError("load_dataset: sample '" + id +
                        "' image and mask dimensions differ");
    }
    s.mask = Image2D(raw_mask.h, raw_mask.w);
    for (std::size_t i = 0; i < raw_mask.pix.size(); ++i) {
      if (raw_mask.pix[i] == 0.0) {
        s.mask.pix[i] = 0.0;
      } else if (raw_mask.pix[i] == 1.0) {
        s.mask.pix[i] = 1.0;
      } else {
        throw DataError("load_dataset: mask of sample '" + id +
                        "' is not binary");
      }
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;  // std::map iteration gives sorted ids
}

void save_manifest(const Dataset& ds, const std::filesystem::path& path) {
  if (!ds.has_split()) {
    throw UsageError("save_manifest: dataset has no split assignment");
  }
  std::ofstream out(path);
  if (!out) {
    throw FormatError("save_manifest: cannot open '" + path.string() + "'");
  }
  out << "id,split\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    out << ds.samples[i].id << ","
        << (ds.split[i] == Split::train ? "train" : "test") << "\n";
  }
}

void apply_manifest(Dataset& ds, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FormatError("apply_manifest: cannot open '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line) || line != "id,split") {
    throw FormatError("apply_manifest: expected header 'id,split' in '" +
                      path.string() + "'");
  }
  std::map<std::string, Split> by_id;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError("apply_manifest: malformed row '" + line + "'");
    }
    const std::string id = line.substr(0, comma);
    const std::string split = line.substr(comma + 1);
    if (split == "train") {
      by_id[id] = Split::train;
    } else if (split == "test") {
      by_id[id] = Split::test;
    } else {
      throw FormatError("apply_manifest: unknown split '" + split + "'");
    }
  }
  ds.split.assign(ds.samples.size(), Split::test);
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto it = by_id.find(ds.samples[i].id);
    if (it == by_id.end()) {
      throw FormatError("apply_manifest: no entry for sample '" +
                        ds.samples[i].id + "'");
    }
    ds.split[i] = it->second;
  }
}

}  // namespace segtrus

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aiaudit/digest.hpp"
#include "aiaudit/errors.hpp"
#include "aiaudit/image_io.hpp"
#include "aiaudit/io.hpp"
#include "aiaudit/parallel.hpp"
#include "aiaudit/rng.hpp"
#include "aiaudit/tensor.hpp"

namespace aiaudit {

inline constexpr int kDefaultAuditResolution = 32;
inline constexpr int kDefaultPhashHammingMax = 4;
inline constexpr double kDefaultTvMax = 0.10;

/// Digest of the decoded float pixels (with dimensions), independent of file encoding.
inline Digest256 content_hash(const Image& img) {
  Sha256 h;
  h.update_int(img.height).update_int(img.width).update_int(img.channels);
  h.update(img.span());
  return h.finish();
}

/// 64-bit average hash: luma, 8x8 mean pooling, bit set where the cell exceeds the mean.
/// Bit 63 is the top-left cell, row-major.
inline std::uint64_t average_hash(const Image& img) {
  const Tensor3 small = resize_area(to_luma(img), 8, 8);
  double mean = 0.0;
  for (float v : small.data) mean += v;
  mean /= 64.0;
  std::uint64_t bits = 0;
  for (int i = 0; i < 64; ++i) {
    bits <<= 1;
    if (small.data[static_cast<std::size_t>(i)] > mean) bits |= 1u;
  }
  return bits;
}

inline int hamming(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

struct LabeledImage {
  Image pixels;
  int label = 0;
  std::string track_id;  // empty = unknown provenance, treated as its own track
  std::string source_name;
  Digest256 content_hash{};
  std::uint64_t phash = 0;
};

/// Builds a LabeledImage and computes both hashes from the pixels.
inline LabeledImage make_labeled(Image pixels, int label, std::string track_id, std::string source_name) {
  require(in_unit_range(pixels.span()), ErrorKind::Contract, "pixels of " + source_name + " outside [0,1]");
  LabeledImage item;
  item.content_hash = content_hash(pixels);
  item.phash = average_hash(pixels);
  item.pixels = std::move(pixels);
  item.label = label;
  item.track_id = std::move(track_id);
  item.source_name = std::move(source_name);
  return item;
}

enum class SplitName { Train, Validation, Test };

inline std::string_view to_string(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
  }
  return "?";
}

struct DatasetSplit {
  SplitName name = SplitName::Train;
  std::vector<LabeledImage> items;

  bool empty() const noexcept { return items.empty(); }
  std::size_t size() const noexcept { return items.size(); }
};

inline void validate_labels(const DatasetSplit& split, int num_classes) {
  for (const auto& item : split.items) {
    require(item.label >= 0 && item.label < num_classes, ErrorKind::Contract,
            std::string(to_string(split.name)) + ": label " + std::to_string(item.label) + " of " +
                item.source_name + " outside [0," + std::to_string(num_classes) + ")");
  }
}

/// Order-sensitive digest over (source name, label, track, content hash) of every item.
inline std::string split_digest(const DatasetSplit& split) {
  Sha256 h;
  h.update_int(split.items.size());
  for (const auto& item : split.items) {
    h.update_int(item.source_name.size()).update(item.source_name);
    h.update_int(item.label);
    h.update_int(item.track_id.size()).update(item.track_id);
    h.update(item.content_hash.data(), item.content_hash.size());
  }
  return to_hex(h.finish());
}

// ---------------------------------------------------------------------------
// Folder loading

struct ManifestEntry {
  std::string filename;
  int class_id = 0;
  std::string track_id;
};

inline std::optional<int> parse_class_id(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

/// Parses `filename,class_id,track_id` rows (header required, no quoting).
inline std::vector<ManifestEntry> parse_manifest(const std::string& text, const std::string& origin) {
  std::vector<ManifestEntry> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      require(line == "filename,class_id,track_id", ErrorKind::Format,
              origin + ": line " + std::to_string(line_no) + ": expected header filename,class_id,track_id");
      header_seen = true;
      continue;
    }
    std::array<std::string, 3> cols;
    std::size_t col = 0;
    for (char ch : line) {
      if (ch == ',') {
        require(++col < 3, ErrorKind::Format, origin + ": line " + std::to_string(line_no) + ": too many columns");
      } else {
        cols[col].push_back(ch);
      }
    }
    require(col == 2, ErrorKind::Format, origin + ": line " + std::to_string(line_no) + ": expected 3 columns");
    auto cls = parse_class_id(cols[1]);
    require(cls.has_value(), ErrorKind::Format,
            origin + ": line " + std::to_string(line_no) + ": bad class_id '" + cols[1] + "'");
    rows.push_back({cols[0], *cls, cols[2]});
  }
  require(header_seen, ErrorKind::Format, origin + ": empty manifest");
  return rows;
}

inline std::string format_manifest(const std::vector<ManifestEntry>& rows) {
  std::string out = "filename,class_id,track_id\n";
  for (const auto& r : rows) out += r.filename + "," + std::to_string(r.class_id) + "," + r.track_id + "\n";
  return out;
}

inline bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".jpg" || ext == ".jpeg";
}

struct LoadOptions {
  int resolution = kDefaultAuditResolution;
};

namespace detail {

inline std::vector<LabeledImage> decode_entries(const fs::path& root, const std::vector<ManifestEntry>& entries,
                                                int expected_classes, const LoadOptions& opts) {
  for (const auto& e : entries) {
    require(e.class_id < expected_classes, ErrorKind::Load,
            e.filename + ": class id " + std::to_string(e.class_id) + " >= expected " +
                std::to_string(expected_classes));
  }
  std::vector<LabeledImage> items(entries.size());
  parallel_for(
      entries.size(), [] { return 0; },
      [&](std::size_t i, int&) {
        const auto& e = entries[i];
        Image img = resize_to(read_image(root / e.filename), opts.resolution, opts.resolution);
        clamp_unit(img);
        items[i] = make_labeled(std::move(img), e.class_id, e.track_id, e.filename);
      });
  return items;
}

}  // namespace detail

/// Lists `<root>/<class_id>/<image>` files, sorted, with provenance from manifest.csv when present.
inline std::vector<ManifestEntry> scan_image_folder(const fs::path& root, int expected_classes) {
  require(fs::is_directory(root), ErrorKind::Load, "dataset root " + root.string() + " is not a directory");
  std::vector<ManifestEntry> entries;
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string name = dir.path().filename().string();
    auto cls = parse_class_id(name);
    require(cls.has_value(), ErrorKind::Load, "unknown class directory name '" + name + "'");
    require(*cls < expected_classes, ErrorKind::Load,
            "class directory " + name + " >= expected classes " + std::to_string(expected_classes));
    for (const auto& f : fs::directory_iterator(dir.path())) {
      if (!f.is_regular_file() || !is_image_file(f.path())) continue;
      entries.push_back({(fs::path(name) / f.path().filename()).generic_string(), *cls, ""});
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.filename < b.filename; });

  const fs::path manifest_path = root / "manifest.csv";
  if (fs::exists(manifest_path)) {
    std::unordered_map<std::string, const ManifestEntry*> by_name;
    const auto manifest = parse_manifest(read_file(manifest_path), manifest_path.string());
    for (const auto& row : manifest) by_name[row.filename] = &row;
    for (auto& e : entries) {
      if (auto it = by_name.find(e.filename); it != by_name.end()) {
        e.class_id = it->second->class_id;
        e.track_id = it->second->track_id;
      }
    }
  }
  return entries;
}

inline std::vector<LabeledImage> load_image_folder(const fs::path& root, int expected_classes,
                                                   const LoadOptions& opts = {}) {
  return detail::decode_entries(root, scan_image_folder(root, expected_classes), expected_classes, opts);
}

/// Loads exactly the files a manifest names (paths relative to root).
inline std::vector<LabeledImage> load_manifest(const fs::path& root, const fs::path& manifest, int expected_classes,
                                               const LoadOptions& opts = {}) {
  return detail::decode_entries(root, parse_manifest(read_file(manifest), manifest.string()), expected_classes,
                                opts);
}

// ---------------------------------------------------------------------------
// Track-disjoint stratified splitting

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  DatasetSplit train{SplitName::Train, {}};
  DatasetSplit validation{SplitName::Validation, {}};
  DatasetSplit test{SplitName::Test, {}};
};

/// Items grouped by track; an empty track id makes the item its own track.
/// Groups are returned in order of first appearance.
inline std::vector<std::vector<std::size_t>> group_by_track(const std::vector<LabeledImage>& items) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].track_id.empty()) {
      groups.push_back({i});
      continue;
    }
    auto [it, inserted] = index.try_emplace(items[i].track_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

/// Splits at track granularity. Tracks are ordered class by class (shuffled
/// within a class by the seed) and each is handed to the split with the
/// largest running deficit against its target fraction, which keeps every
/// class and the overall sizes within one track of proportional.
inline DatasetSplits split_dataset(const std::vector<LabeledImage>& items, SplitFractions fractions,
                                   std::uint64_t seed) {
  const std::array<double, 3> f{fractions.train, fractions.validation, fractions.test};
  require(f[0] > 0 && f[1] > 0 && f[2] > 0, ErrorKind::Contract, "split fractions must be positive");
  require(std::abs(f[0] + f[1] + f[2] - 1.0) <= 1e-9, ErrorKind::Contract, "split fractions must sum to 1");

  auto groups = group_by_track(items);
  require(groups.size() >= 2, ErrorKind::CannotSplit,
          "all " + std::to_string(items.size()) + " items belong to a single track");

  // Track class = most frequent label in the track (lowest id on ties).
  std::map<int, std::vector<std::size_t>> tracks_by_class;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::map<int, int> counts;
    for (auto i : groups[g]) ++counts[items[i].label];
    int best = counts.begin()->first;
    for (auto [label, n] : counts)
      if (n > counts[best]) best = label;
    tracks_by_class[best].push_back(g);
  }

  Rng rng(seed);
  std::array<double, 3> assigned{0, 0, 0};
  std::vector<int> split_of(groups.size(), 0);
  double position = 0;
  for (auto& [label, tracks] : tracks_by_class) {
    shuffle(tracks, rng);
    for (auto g : tracks) {
      position += 1;
      int best = 0;
      double best_deficit = -1e300;
      for (int s = 0; s < 3; ++s) {
        const double deficit = f[s] * position - assigned[s];
        if (deficit > best_deficit + 1e-12) {
          best_deficit = deficit;
          best = s;
        }
      }
      assigned[best] += 1;
      split_of[g] = best;
    }
  }

  DatasetSplits out;
  std::array<DatasetSplit*, 3> targets{&out.train, &out.validation, &out.test};
  // Items keep their original relative order inside each split.
  std::vector<int> split_of_item(items.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (auto i : groups[g]) split_of_item[i] = split_of[g];
  for (std::size_t i = 0; i < items.size(); ++i) targets[split_of_item[i]]->items.push_back(items[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Independence evidence

using ClassHistogram = std::map<int, double>;

/// Relative class frequencies.
inline ClassHistogram class_histogram(const DatasetSplit& split) {
  ClassHistogram h;
  for (const auto& item : split.items) h[item.label] += 1.0;
  for (auto& [_, v] : h) v /= static_cast<double>(split.size());
  return h;
}

/// Total variation distance 0.5 * sum |p - q| over the union of supports.
inline double total_variation(const ClassHistogram& p, const ClassHistogram& q) {
  double sum = 0.0;
  for (const auto& [k, v] : p) {
    auto it = q.find(k);
    sum += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q)
    if (!p.contains(k)) sum += v;
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

struct PairCounts {
  SplitName first = SplitName::Train;
  SplitName second = SplitName::Validation;
  std::size_t exact_overlap = 0;
  std::size_t near_duplicate = 0;  // excludes exact matches
  std::size_t track_overlap = 0;   // distinct shared non-empty track ids
  double tv_distance = 0.0;
  std::vector<std::pair<std::string, std::string>> exact_examples;
  std::vector<std::pair<std::string, std::string>> near_examples;
  std::vector<std::string> shared_tracks;
};

struct IndependenceReport {
  std::array<PairCounts, 3> pairs;  // (train,val), (train,test), (val,test)
  std::map<SplitName, ClassHistogram> class_histograms;
  std::map<SplitName, std::size_t> split_sizes;
  std::map<SplitName, std::size_t> items_without_track;
  double max_pairwise_tv_distance = 0.0;
  bool disjoint = true;
  bool same_distribution = true;
  int phash_hamming_max = kDefaultPhashHammingMax;
  double tv_max = kDefaultTvMax;
  std::optional<double> confirm_min_correlation;
};

inline constexpr std::size_t kMaxFindingExamples = 10;

/// Pearson correlation of the luma planes; two constant images correlate 1 when equal, else 0.
inline double luma_correlation(const Image& a, const Image& b) {
  require(a.same_shape(b), ErrorKind::Contract, "correlation needs equal image shapes");
  const Tensor3 la = to_luma(a), lb = to_luma(b);
  const std::size_t n = la.data.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += la.data[i];
    mb += lb.data[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = la.data[i] - ma, y = lb.data[i] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa <= 0.0 || sbb <= 0.0) return saa == sbb && ma == mb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Hash matches count as near-duplicates; with `confirm_min_correlation` set a
/// match must also reach that luma correlation.
inline PairCounts compare_splits(const DatasetSplit& a, const DatasetSplit& b, int phash_hamming_max,
                                 std::optional<double> confirm_min_correlation = std::nullopt) {
  PairCounts pc;
  pc.first = a.name;
  pc.second = b.name;
  for (const auto& x : a.items) {
    for (const auto& y : b.items) {
      if (x.content_hash == y.content_hash) {
        ++pc.exact_overlap;
        if (pc.exact_examples.size() < kMaxFindingExamples) pc.exact_examples.emplace_back(x.source_name, y.source_name);
      } else if (hamming(x.phash, y.phash) <= phash_hamming_max &&
                 (!confirm_min_correlation || (x.pixels.same_shape(y.pixels) &&
                                               luma_correlation(x.pixels, y.pixels) >= *confirm_min_correlation))) {
        ++pc.near_duplicate;
        if (pc.near_examples.size() < kMaxFindingExamples) pc.near_examples.emplace_back(x.source_name, y.source_name);
      }
    }
  }
  std::set<std::string> tracks_a, tracks_b;
  for (const auto& x : a.items)
    if (!x.track_id.empty()) tracks_a.insert(x.track_id);
  for (const auto& y : b.items)
    if (!y.track_id.empty()) tracks_b.insert(y.track_id);
  std::set_intersection(tracks_a.begin(), tracks_a.end(), tracks_b.begin(), tracks_b.end(),
                        std::back_inserter(pc.shared_tracks));
  pc.track_overlap = pc.shared_tracks.size();
  if (pc.shared_tracks.size() > kMaxFindingExamples) pc.shared_tracks.resize(kMaxFindingExamples);
  pc.tv_distance = total_variation(class_histogram(a), class_histogram(b));
  return pc;
}

inline IndependenceReport independence_check(const DatasetSplit& train, const DatasetSplit& val,
                                              const DatasetSplit& test,
                                              int phash_hamming_max = kDefaultPhashHammingMax,
                                              double tv_max = kDefaultTvMax,
                                              std::optional<double> confirm_min_correlation = std::nullopt) {
  for (const DatasetSplit* s : {&train, &val, &test}) {
    require(!s->empty(), ErrorKind::Evidence,
            std::string(to_string(s->name)) + " split is empty; independence cannot be established");
  }
  IndependenceReport r;
  r.phash_hamming_max = phash_hamming_max;
  r.tv_max = tv_max;
  r.confirm_min_correlation = confirm_min_correlation;
  r.pairs = {compare_splits(train, val, phash_hamming_max, confirm_min_correlation),
             compare_splits(train, test, phash_hamming_max, confirm_min_correlation),
             compare_splits(val, test, phash_hamming_max, confirm_min_correlation)};
  for (const DatasetSplit* s : {&train, &val, &test}) {
    r.class_histograms[s->name] = class_histogram(*s);
    r.split_sizes[s->name] = s->size();
    r.items_without_track[s->name] = static_cast<std::size_t>(
        std::count_if(s->items.begin(), s->items.end(), [](const LabeledImage& i) { return i.track_id.empty(); }));
  }
  for (const auto& pc : r.pairs) {
    r.max_pairwise_tv_distance = std::max(r.max_pairwise_tv_distance, pc.tv_distance);
    if (pc.exact_overlap || pc.near_duplicate || pc.track_overlap) r.disjoint = false;
  }
  r.same_distribution = r.max_pairwise_tv_distance <= tv_max;
  return r;
}

inline Json to_json(const IndependenceReport& r) {
  Json pairs = Json::array();
  for (const auto& pc : r.pairs) {
    Json exact = Json::array(), near = Json::array();
    for (const auto& [a, b] : pc.exact_examples) exact.push_back({a, b});
    for (const auto& [a, b] : pc.near_examples) near.push_back({a, b});
    pairs.push_back({{"splits", {to_string(pc.first), to_string(pc.second)}},
                     {"exact_overlap_count", pc.exact_overlap},
                     {"near_duplicate_count", pc.near_duplicate},
                     {"track_overlap_count", pc.track_overlap},
                     {"tv_distance", pc.tv_distance},
                     {"exact_examples", exact},
                     {"near_duplicate_examples", near},
                     {"shared_tracks", pc.shared_tracks}});
  }
  Json hist = Json::object(), sizes = Json::object(), untracked = Json::object();
  for (const auto& [name, h] : r.class_histograms) {
    Json jh = Json::object();
    for (const auto& [cls, freq] : h) jh[std::to_string(cls)] = freq;
    hist[std::string(to_string(name))] = jh;
  }
  for (const auto& [name, n] : r.split_sizes) sizes[std::string(to_string(name))] = n;
  for (const auto& [name, n] : r.items_without_track) untracked[std::string(to_string(name))] = n;
  return {{"pairs", pairs},
          {"class_histograms", hist},
          {"split_sizes", sizes},
          {"items_without_track", untracked},
          {"max_pairwise_tv_distance", r.max_pairwise_tv_distance},
          {"disjoint", r.disjoint},
          {"same_distribution", r.same_distribution},
          {"phash_hamming_max", r.phash_hamming_max},
          {"tv_max", r.tv_max},
          {"confirm_min_correlation", r.confirm_min_correlation ? Json(*r.confirm_min_correlation) : Json(nullptr)},
          {"distribution_proxy", "total variation distance between class-frequency histograms"}};
}

}  // namespace aiaudit

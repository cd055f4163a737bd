#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "efflif/error.hpp"
#include "efflif/spec_io.hpp"

namespace efflif {

struct sample {
  std::vector<float> features;  // [channels x length], channel-major
  std::size_t label = 0;
};

struct sequence_dataset {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t n_classes = 2;
  std::string tag;  // "train", "val", "test" or empty
  std::vector<sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  std::size_t features() const noexcept { return channels * length; }

  void check() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].features.size() != features())
        throw data_error("sample " + std::to_string(i) + " has " + std::to_string(samples[i].features.size()) +
                         " features, expected " + std::to_string(features()));
      if (samples[i].label >= n_classes)
        throw data_error("sample " + std::to_string(i) + " label " + std::to_string(samples[i].label) +
                         " out of range [0, " + std::to_string(n_classes) + ")");
    }
  }
};

struct csv_schema {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t n_classes = 2;
  long label_column = -1;  // -1: last column
  bool header = false;
};

namespace detail {
inline std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto c = s.find(',', start);
    out.push_back(s.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}
}  // namespace detail

/// One sample per row: C*L feature values and an integer label.
inline sequence_dataset read_csv(std::istream& in, const csv_schema& schema, const std::string& origin = "<csv>") {
  if (schema.channels == 0 || schema.length == 0 || schema.n_classes == 0)
    throw config_error("csv schema needs channels, length and classes >= 1");
  sequence_dataset ds{schema.channels, schema.length, schema.n_classes, "", {}};
  const std::size_t cols = ds.features() + 1;
  if (schema.label_column < -1 || schema.label_column >= static_cast<long>(cols))
    throw config_error("label column " + std::to_string(schema.label_column) + " outside the " +
                       std::to_string(cols) + " columns");
  const std::size_t label_col = schema.label_column < 0 ? cols - 1 : static_cast<std::size_t>(schema.label_column);

  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (line == 1 && schema.header) continue;
    if (detail::strip(raw).empty()) continue;
    const auto fields = detail::split_commas(raw);
    if (fields.size() != cols)
      throw parse_error(line, origin + ": expected " + std::to_string(cols) + " columns, found " + std::to_string(fields.size()));
    sample s;
    s.features.reserve(ds.features());
    for (std::size_t c = 0; c < cols; ++c) {
      const auto f = detail::strip(fields[c]);
      if (c == label_col) {
        long long v = 0;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc{} || p != f.data() + f.size())
          throw parse_error(line, origin + ": label '" + std::string(f) + "' is not an integer");
        if (v < 0 || static_cast<std::size_t>(v) >= ds.n_classes)
          throw data_error(origin + ":" + std::to_string(line) + ": label " + std::to_string(v) + " out of range [0, " +
                           std::to_string(ds.n_classes) + ")");
        s.label = static_cast<std::size_t>(v);
      } else {
        float v = 0;
        auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc{} || p != f.data() + f.size() || !std::isfinite(v))
          throw parse_error(line, origin + ": column " + std::to_string(c) + ": '" + std::string(f) + "' is not a finite number");
        s.features.push_back(v);
      }
    }
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw data_error(origin + ": no samples");
  return ds;
}

inline sequence_dataset load_csv(const std::string& path, const csv_schema& schema) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open '" + path + "'");
  return read_csv(f, schema, path);
}

/// Shortest round-trip text for every value, label last.
inline void write_csv(std::ostream& out, const sequence_dataset& ds) {
  char buf[64];
  for (const auto& s : ds.samples) {
    for (float v : s.features) {
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, p - buf);
      out.put(',');
    }
    out << s.label << '\n';
  }
}

inline void save_csv(const std::string& path, const sequence_dataset& ds) {
  std::ofstream f(path);
  if (!f) throw data_error("cannot write '" + path + "'");
  write_csv(f, ds);
}

struct dataset_splits {
  sequence_dataset train, val, test;
};

/// Shuffles indices with `seed` and cuts train/val/test. Train and val sizes
/// are rounded half up; the test split takes the remainder.
inline dataset_splits split(const sequence_dataset& ds, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0)) throw config_error("split fractions must be non-negative");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw config_error("split fractions must sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_train = std::min(n, static_cast<std::size_t>(std::floor(fractions[0] * n + 0.5)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(fractions[1] * n + 0.5)));
  dataset_splits out;
  sequence_dataset* parts[3] = {&out.train, &out.val, &out.test};
  const char* tags[3] = {"train", "val", "test"};
  for (int i = 0; i < 3; ++i) {
    *parts[i] = sequence_dataset{ds.channels, ds.length, ds.n_classes, tags[i], {}};
  }
  for (std::size_t k = 0; k < n; ++k) {
    auto* dst = k < n_train ? parts[0] : k < n_train + n_val ? parts[1] : parts[2];
    dst->samples.push_back(ds.samples[idx[k]]);
  }
  return out;
}

/// Per-channel standardization. Fit on the training split, apply anywhere.
struct standardizer {
  std::vector<double> mean, stddev;

  static constexpr double std_floor = 1e-8;

  static standardizer fit(const sequence_dataset& train) {
    if (train.samples.empty()) throw data_error("cannot fit standardization on an empty split");
    standardizer s;
    s.mean.assign(train.channels, 0.0);
    s.stddev.assign(train.channels, 0.0);
    const double count = static_cast<double>(train.size() * train.length);
    for (const auto& smp : train.samples)
      for (std::size_t c = 0; c < train.channels; ++c)
        for (std::size_t p = 0; p < train.length; ++p) s.mean[c] += smp.features[c * train.length + p];
    for (auto& m : s.mean) m /= count;
    for (const auto& smp : train.samples)
      for (std::size_t c = 0; c < train.channels; ++c)
        for (std::size_t p = 0; p < train.length; ++p) {
          const double d = smp.features[c * train.length + p] - s.mean[c];
          s.stddev[c] += d * d;
        }
    for (auto& v : s.stddev) v = std::max(std::sqrt(v / count), std_floor);
    return s;
  }

  void apply(sequence_dataset& ds) const {
    if (ds.channels != mean.size())
      throw dimension_error("standardizer fitted on " + std::to_string(mean.size()) + " channels, dataset has " +
                            std::to_string(ds.channels));
    for (auto& smp : ds.samples)
      for (std::size_t c = 0; c < ds.channels; ++c)
        for (std::size_t p = 0; p < ds.length; ++p) {
          float& v = smp.features[c * ds.length + p];
          v = static_cast<float>((v - mean[c]) / stddev[c]);
        }
  }
};

/// Binary task: label = XOR of the values at positions 0 and seq_len-1.
/// Other positions hold random 0/1 distractors. Event pairs cycle through
/// the four combinations, so classes are balanced within one sample.
inline sequence_dataset synth_temporal_xor(std::size_t n, std::size_t seq_len, std::uint64_t seed) {
  if (n < 2 || seq_len < 2) throw config_error("temporal xor needs n >= 2 and seq_len >= 2");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  sequence_dataset ds{1, seq_len, 2, "", {}};
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = (i & 1u) != 0, b = (i & 2u) != 0;
    sample s;
    s.features.resize(seq_len);
    for (auto& v : s.features) v = coin(rng) ? 1.0f : 0.0f;
    s.features.front() = a ? 1.0f : 0.0f;
    s.features.back() = b ? 1.0f : 0.0f;
    s.label = (a != b) ? 1 : 0;
    ds.samples.push_back(std::move(s));
  }
  std::shuffle(ds.samples.begin(), ds.samples.end(), rng);
  return ds;
}

// Manifest: schema = efflif-data/1
//   [data]  csv, channels, length, classes, label_column, header
//   [split] train, val, test (fractions), seed
// or, instead of csv + [split], pre-split files train_csv, val_csv, test_csv.
inline constexpr const char* data_schema = "efflif-data/1";

struct data_manifest {
  csv_schema schema;
  std::string csv;  // single file, split by fractions
  std::string train_csv, val_csv, test_csv;
  std::array<double, 3> fractions{0.64, 0.16, 0.20};
  std::uint64_t seed = 0;
};

inline data_manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open manifest '" + path + "'");
  const auto doc = parse_ini(f, path);
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path fp(p);
    return fp.is_absolute() ? p : (base / fp).string();
  };
  {
    ini_reader g(doc.globals, path);
    const auto schema = g.str("schema", "");
    if (schema != data_schema)
      throw config_error(path + ": unsupported schema '" + schema + "' (expected " + data_schema + ")");
    g.finish();
  }
  data_manifest m;
  bool have_data = false, have_split = false;
  for (const auto& sec : doc.sections) {
    ini_reader r(sec, path);
    if (sec.name == "data") {
      have_data = true;
      m.csv = resolve(r.str("csv", ""));
      m.train_csv = resolve(r.str("train_csv", ""));
      m.val_csv = resolve(r.str("val_csv", ""));
      m.test_csv = resolve(r.str("test_csv", ""));
      m.schema.channels = r.size("channels");
      m.schema.length = r.size("length");
      m.schema.n_classes = r.size("classes");
      m.schema.label_column = static_cast<long>(r.has("label_column") ? r.integer("label_column") : -1);
      m.schema.header = r.boolean("header", false);
    } else if (sec.name == "split") {
      have_split = true;
      m.fractions = {r.real("train", 0.64), r.real("val", 0.16), r.real("test", 0.20)};
      m.seed = static_cast<std::uint64_t>(r.size("seed", 0));
    } else {
      r.fail("unknown section");
    }
    r.finish();
  }
  if (!have_data) throw config_error(path + ": missing [data] section");
  const bool presplit = !m.train_csv.empty();
  if (presplit == !m.csv.empty())
    throw config_error(path + ": give either csv or train_csv/val_csv/test_csv");
  if (presplit && (m.val_csv.empty() || m.test_csv.empty()))
    throw config_error(path + ": train_csv needs val_csv and test_csv");
  if (presplit && have_split) throw config_error(path + ": [split] only applies to a single csv");
  return m;
}

/// Loads and splits the data named by a manifest, then standardizes all
/// splits with statistics of the training split.
inline dataset_splits load_splits(const data_manifest& m, bool standardize = true) {
  dataset_splits s;
  if (!m.csv.empty()) {
    s = split(load_csv(m.csv, m.schema), m.fractions, m.seed);
  } else {
    s.train = load_csv(m.train_csv, m.schema);
    s.val = load_csv(m.val_csv, m.schema);
    s.test = load_csv(m.test_csv, m.schema);
    s.train.tag = "train";
    s.val.tag = "val";
    s.test.tag = "test";
  }
  if (standardize) {
    const auto st = standardizer::fit(s.train);
    st.apply(s.train);
    st.apply(s.val);
    st.apply(s.test);
  }
  return s;
}

}  // namespace efflif

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"

namespace s2v {

struct DatasetMeta {
  std::string name;
  std::vector<std::string> label_names;  // .ts class tokens, first-appearance order
  bool normalized = false;
};

/// Fixed-shape collection of multichannel series with optional labels.
struct Dataset {
  NdArray samples;  // [n, d_x, L]
  std::optional<std::vector<std::size_t>> labels;
  DatasetMeta meta;

  std::size_t size() const { return samples.rank() == 3 ? samples.size(0) : 0; }
  std::size_t channels() const { return samples.size(1); }
  std::size_t length() const { return samples.size(2); }

  std::size_t num_classes() const {
    if (!labels || labels->empty()) return 0;
    return 1 + *std::max_element(labels->begin(), labels->end());
  }

  NdArray sample(std::size_t i) const {
    check_arg(i < size(), "Dataset::sample: index out of range");
    const std::size_t per = channels() * length();
    NdArray out({channels(), length()});
    for (std::size_t k = 0; k < per; ++k) out[k] = samples[i * per + k];
    return out;
  }

  /// Stacks the chosen samples into a [B, d_x, L] batch.
  NdArray gather(const std::vector<std::size_t>& idx) const {
    const std::size_t per = channels() * length();
    NdArray out({idx.size(), channels(), length()});
    for (std::size_t b = 0; b < idx.size(); ++b) {
      check_arg(idx[b] < size(), "Dataset::gather: index out of range");
      for (std::size_t k = 0; k < per; ++k) out[b * per + k] = samples[idx[b] * per + k];
    }
    return out;
  }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.samples = gather(idx);
    out.meta = meta;
    if (labels) {
      std::vector<std::size_t> lb(idx.size());
      for (std::size_t b = 0; b < idx.size(); ++b) lb[b] = (*labels)[idx[b]];
      out.labels = std::move(lb);
    }
    return out;
  }

  void validate() const {
    check_arg(samples.rank() == 3, "Dataset: samples must be [n, d_x, L]");
    if (labels) check_arg(labels->size() == size(), "Dataset: label count mismatch");
  }
};

/// Per-channel per-sample standardization; constant channels become zero.
inline void znormalize(Dataset& ds) {
  const std::size_t n = ds.size(), d = ds.channels(), L = ds.length();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) {
      double* row = ds.samples.ptr() + (i * d + c) * L;
      double mean = 0.0;
      for (std::size_t t = 0; t < L; ++t) mean += row[t];
      mean /= static_cast<double>(L);
      double var = 0.0;
      for (std::size_t t = 0; t < L; ++t) var += (row[t] - mean) * (row[t] - mean);
      var /= static_cast<double>(L);
      if (var > 0.0) {
        const double isd = 1.0 / std::sqrt(var);
        for (std::size_t t = 0; t < L; ++t) row[t] = (row[t] - mean) * isd;
      } else {
        for (std::size_t t = 0; t < L; ++t) row[t] = 0.0;
      }
    }
  ds.meta.normalized = true;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_value(const std::string& tok, const std::string& where) {
  const std::string t = trim(tok);
  check_runtime(!t.empty(), "parse error at " + where + ": empty value");
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("parse error at " + where + ": unreadable value '" + t + "'");
  }
  check_runtime(pos == t.size(),
                "parse error at " + where + ": trailing characters in '" + t + "'");
  return v;
}

}  // namespace detail

/// Loads a directory of per-sample CSV files (L rows x d_x columns) plus an
/// optional labels.csv index (lines "filename,label"). Samples are ordered
/// by filename.
inline Dataset load_csv_dir(const std::string& path, bool normalize = true) {
  namespace fs = std::filesystem;
  check_runtime(fs::is_directory(path), "load_csv_dir: not a directory: " + path);
  std::vector<std::string> files;
  for (const fs::directory_entry& e : fs::directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (name == "labels.csv") continue;
    files.push_back(name);
  }
  check_runtime(!files.empty(), "load_csv_dir: no samples in " + path);
  std::sort(files.begin(), files.end());

  std::vector<std::vector<std::vector<double>>> rows_per_file;  // file -> row -> col
  std::size_t L = 0, d = 0;
  for (const std::string& f : files) {
    std::ifstream in(fs::path(path) / f);
    check_runtime(static_cast<bool>(in), "load_csv_dir: cannot open " + f);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (detail::trim(line).empty()) continue;
      const std::vector<std::string> toks = detail::split_on(line, ',');
      std::vector<double> row;
      row.reserve(toks.size());
      for (std::size_t c = 0; c < toks.size(); ++c)
        row.push_back(detail::parse_value(
            toks[c], f + " row " + std::to_string(lineno) + " column " +
                         std::to_string(c + 1)));
      rows.push_back(std::move(row));
    }
    check_runtime(!rows.empty(), "load_csv_dir: empty sample file " + f);
    for (std::size_t r = 1; r < rows.size(); ++r)
      check_runtime(rows[r].size() == rows[0].size(),
                    "load_csv_dir: ragged row in " + f);
    if (rows_per_file.empty()) {
      L = rows.size();
      d = rows[0].size();
    } else {
      check_arg(rows.size() == L && rows[0].size() == d,
                "load_csv_dir: sample " + f + " has shape " +
                    std::to_string(rows.size()) + "x" + std::to_string(rows[0].size()) +
                    " but expected " + std::to_string(L) + "x" + std::to_string(d));
    }
    rows_per_file.push_back(std::move(rows));
  }

  Dataset ds;
  ds.meta.name = fs::path(path).filename().string();
  ds.samples = NdArray({files.size(), d, L});
  for (std::size_t i = 0; i < files.size(); ++i)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t t = 0; t < L; ++t)
        ds.samples[(i * d + c) * L + t] = rows_per_file[i][t][c];

  const std::filesystem::path labels_path = fs::path(path) / "labels.csv";
  if (fs::exists(labels_path)) {
    std::ifstream in(labels_path);
    check_runtime(static_cast<bool>(in), "load_csv_dir: cannot open labels.csv");
    std::map<std::string, std::size_t> by_name;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      const std::vector<std::string> toks = detail::split_on(t, ',');
      check_runtime(toks.size() == 2, "load_csv_dir: labels.csv line " +
                                          std::to_string(lineno) +
                                          " must be 'filename,label'");
      const double v = detail::parse_value(toks[1], "labels.csv row " +
                                                        std::to_string(lineno));
      check_runtime(v >= 0.0 && v == std::floor(v),
                    "load_csv_dir: labels.csv line " + std::to_string(lineno) +
                        ": label must be a non-negative integer");
      by_name[detail::trim(toks[0])] = static_cast<std::size_t>(v);
    }
    std::vector<std::size_t> lb(files.size());
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto it = by_name.find(files[i]);
      check_runtime(it != by_name.end(),
                    "load_csv_dir: labels.csv has no entry for " + files[i]);
      lb[i] = it->second;
    }
    ds.labels = std::move(lb);
  }
  if (normalize) znormalize(ds);
  return ds;
}

/// Writes the CSV-dir layout produced/consumed by load_csv_dir. Output is
/// byte-stable and value-exact (17 significant digits).
inline void save_csv_dir(const Dataset& ds, const std::string& path) {
  namespace fs = std::filesystem;
  fs::create_directories(path);
  const std::size_t n = ds.size(), d = ds.channels(), L = ds.length();
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), "sample_%06zu.csv", i);
    std::ofstream out(fs::path(path) / buf);
    check_runtime(static_cast<bool>(out), "save_csv_dir: cannot write " +
                                              std::string(buf));
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t c = 0; c < d; ++c) {
        char vb[40];
        std::snprintf(vb, sizeof(vb), "%.17g", ds.samples[(i * d + c) * L + t]);
        out << (c ? "," : "") << vb;
      }
      out << "\n";
    }
  }
  if (ds.labels) {
    std::ofstream out(fs::path(path) / "labels.csv");
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "sample_%06zu.csv", i);
      out << buf << "," << (*ds.labels)[i] << "\n";
    }
  }
}

/// Parses the sktime/UEA text archive format: @-directives, then one series
/// per line with channels separated by ':' and values by ','; the trailing
/// field is the class token when @classLabel is true.
inline Dataset load_ts_sktime(const std::string& path, bool normalize = true) {
  std::ifstream in(path);
  check_runtime(static_cast<bool>(in), "load_ts_sktime: cannot open " + path);
  std::string problem_name;
  bool has_labels = false;
  bool in_data = false;
  std::vector<std::string> label_names;
  std::map<std::string, std::size_t> label_ids;
  std::vector<std::vector<std::vector<double>>> all;  // sample -> channel -> t
  std::vector<std::size_t> labels;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!in_data && t[0] == '@') {
      const std::size_t sp = t.find_first_of(" \t");
      std::string key = t.substr(0, sp);
      std::transform(key.begin(), key.end(), key.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      const std::string rest =
          sp == std::string::npos ? std::string() : detail::trim(t.substr(sp));
      if (key == "@problemname") {
        problem_name = rest;
      } else if (key == "@classlabel") {
        has_labels = rest.rfind("true", 0) == 0;
      } else if (key == "@data") {
        in_data = true;
      } else if (key == "@univariate" || key == "@dimension" ||
                 key == "@equallength" || key == "@serieslength" ||
                 key == "@timestamps" || key == "@missing" || key == "@targetlabel") {
        // shape/format hints; the data section is validated directly
      } else {
        std::cerr << "load_ts_sktime: warning: unknown directive " << key
                  << " at line " << lineno << "\n";
      }
      continue;
    }
    if (!in_data) continue;
    std::vector<std::string> fields = detail::split_on(t, ':');
    std::string label_tok;
    if (has_labels) {
      check_runtime(fields.size() >= 2, "load_ts_sktime: line " +
                                            std::to_string(lineno) +
                                            " has no class field");
      label_tok = detail::trim(fields.back());
      fields.pop_back();
    }
    std::vector<std::vector<double>> chans;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::vector<std::string> toks = detail::split_on(fields[c], ',');
      std::vector<double> vals;
      vals.reserve(toks.size());
      for (std::size_t k = 0; k < toks.size(); ++k)
        vals.push_back(detail::parse_value(
            toks[k], "line " + std::to_string(lineno) + " channel " +
                         std::to_string(c + 1) + " value " + std::to_string(k + 1)));
      chans.push_back(std::move(vals));
    }
    check_runtime(!chans.empty() && !chans[0].empty(),
                  "load_ts_sktime: empty series at line " + std::to_string(lineno));
    for (std::size_t c = 1; c < chans.size(); ++c)
      check_runtime(chans[c].size() == chans[0].size(),
                    "load_ts_sktime: ragged channels at line " + std::to_string(lineno));
    if (!all.empty()) {
      check_runtime(chans.size() == all[0].size() &&
                        chans[0].size() == all[0][0].size(),
                    "load_ts_sktime: unequal-length series at line " +
                        std::to_string(lineno) + " are not supported");
    }
    all.push_back(std::move(chans));
    if (has_labels) {
      auto it = label_ids.find(label_tok);
      if (it == label_ids.end()) {
        it = label_ids.emplace(label_tok, label_names.size()).first;
        label_names.push_back(label_tok);
      }
      labels.push_back(it->second);
    }
  }
  check_runtime(!all.empty(), "load_ts_sktime: no data section in " + path);

  Dataset ds;
  ds.meta.name = problem_name.empty()
                     ? std::filesystem::path(path).stem().string()
                     : problem_name;
  ds.meta.label_names = label_names;
  const std::size_t n = all.size(), d = all[0].size(), L = all[0][0].size();
  ds.samples = NdArray({n, d, L});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t tt = 0; tt < L; ++tt)
        ds.samples[(i * d + c) * L + tt] = all[i][c][tt];
  if (has_labels) ds.labels = std::move(labels);
  if (normalize) znormalize(ds);
  return ds;
}

enum class SyntheticKind { tones, shapes, warps };

inline SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "tones") return SyntheticKind::tones;
  if (s == "shapes") return SyntheticKind::shapes;
  if (s == "warps") return SyntheticKind::warps;
  throw std::invalid_argument("make_synthetic: unknown kind '" + s +
                              "' (expected tones|shapes|warps)");
}

namespace detail {

/// Deterministic noiseless prototype for class c, channel chan, time t in
/// [0,1). Tones: distinct integer cycle counts. Shapes: bell / funnel /
/// cylinder-style envelopes. Warps: one bell sampled under per-class time
/// warping.
inline double synthetic_base(SyntheticKind kind, std::size_t c, std::size_t chan,
                             double u) {
  const double phase = static_cast<double>(chan) * (std::numbers::pi / 3.0);
  switch (kind) {
    case SyntheticKind::tones: {
      const double cycles = 2.0 * static_cast<double>(c + 1);
      return std::sin(2.0 * std::numbers::pi * cycles * u + phase);
    }
    case SyntheticKind::shapes: {
      const double mode = static_cast<double>(c % 3);
      if (mode == 0.0) {  // bell
        const double z = (u - 0.5) / 0.15;
        return std::exp(-0.5 * z * z) + 0.05 * phase;
      }
      if (mode == 1.0) {  // funnel: sharp rise, slow decay
        return u < 0.25 ? 4.0 * u : 1.0 - (u - 0.25) / 0.75 + 0.05 * phase;
      }
      // cylinder: plateau in the middle half
      return (u >= 0.25 && u < 0.75 ? 1.0 : 0.0) + 0.05 * phase;
    }
    case SyntheticKind::warps: {
      const double exponents[] = {0.6, 1.0, 1.6};
      const double p = exponents[c % 3] * (1.0 + 0.3 * static_cast<double>(c / 3));
      const double w = std::pow(u, p);
      const double z = (w - 0.5) / 0.18;
      return std::exp(-0.5 * z * z) + 0.02 * phase;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Seeded synthetic fixtures: n_classes x n_per_class series of length L
/// with additive N(0, sigma^2) noise over a deterministic class prototype.
inline Dataset make_synthetic(SyntheticKind kind, std::size_t n_classes,
                              std::size_t n_per_class, std::size_t L, std::size_t d_x,
                              double noise_sigma, std::uint64_t seed) {
  check_arg(n_classes >= 1 && n_per_class >= 1, "make_synthetic: empty dataset");
  check_arg(L >= 2 && d_x >= 1, "make_synthetic: need L >= 2 and d_x >= 1");
  check_arg(noise_sigma >= 0.0, "make_synthetic: noise_sigma must be >= 0");
  Dataset ds;
  ds.meta.name = "synthetic";
  const std::size_t n = n_classes * n_per_class;
  ds.samples = NdArray({n, d_x, L});
  std::vector<std::size_t> labels(n);
  Rng rng(seed);
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t s = 0; s < n_per_class; ++s) {
      const std::size_t i = c * n_per_class + s;
      labels[i] = c;
      for (std::size_t ch = 0; ch < d_x; ++ch)
        for (std::size_t t = 0; t < L; ++t) {
          const double u = static_cast<double>(t) / static_cast<double>(L);
          double v = detail::synthetic_base(kind, c, ch, u);
          if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
          ds.samples[(i * d_x + ch) * L + t] = v;
        }
    }
  ds.labels = std::move(labels);
  return ds;
}

struct SplitResult {
  Dataset train, val, test;
};

/// Seeded three-way split; with stratified=true the shuffle and the
/// fraction arithmetic run per class.
inline SplitResult split(const Dataset& ds, double train_frac, double val_frac,
                         double test_frac, std::uint64_t seed, bool stratified) {
  check_arg(std::abs(train_frac + val_frac + test_frac - 1.0) <= 1e-9,
            "split: fractions must sum to 1");
  check_arg(train_frac >= 0.0 && val_frac >= 0.0 && test_frac >= 0.0,
            "split: fractions must be non-negative");
  check_arg(!stratified || ds.labels.has_value(),
            "split: stratified split requires labels");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> groups;
  if (stratified) {
    groups.resize(ds.num_classes());
    for (std::size_t i = 0; i < ds.size(); ++i) groups[(*ds.labels)[i]].push_back(i);
  } else {
    groups.emplace_back(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) groups[0][i] = i;
  }
  std::vector<std::size_t> tr, va, te;
  for (std::vector<std::size_t>& g : groups) {
    rng.shuffle(g);
    const std::size_t n = g.size();
    const std::size_t nt = static_cast<std::size_t>(std::floor(
        train_frac * static_cast<double>(n) + 1e-9));
    const std::size_t nv = static_cast<std::size_t>(std::floor(
        val_frac * static_cast<double>(n) + 1e-9));
    for (std::size_t i = 0; i < n; ++i) {
      if (i < nt)
        tr.push_back(g[i]);
      else if (i < nt + nv)
        va.push_back(g[i]);
      else
        te.push_back(g[i]);
    }
  }
  SplitResult out;
  out.train = ds.subset(tr);
  out.val = ds.subset(va);
  out.test = ds.subset(te);
  return out;
}

}  // namespace s2v

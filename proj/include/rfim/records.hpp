#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfim/errors.hpp"
#include "rfim/experiments.hpp"
#include "rfim/stats.hpp"

namespace rfim {

using json = nlohmann::json;

/// One line-delimited record. Keys are emitted in sorted order and numbers in
/// shortest round-trip form, so equal records serialize to equal bytes.
inline std::string to_record_line(const ExperimentRecord& rec) {
  json j;
  j["kind"] = rec.kind;
  j["N"] = rec.N;
  j["eps"] = rec.epsilon;
  j["seed"] = rec.master_seed;
  j["index"] = rec.sample_index;
  j["scalars"] = rec.scalars;
  j["flags"] = rec.flags;
  j["tie"] = rec.tie;
  return j.dump();
}

inline ExperimentRecord parse_record_line(const std::string& line) {
  const json j = json::parse(line);
  ExperimentRecord rec;
  rec.kind = j.at("kind").get<std::string>();
  rec.N = j.at("N").get<std::int32_t>();
  rec.epsilon = j.at("eps").get<double>();
  rec.master_seed = j.at("seed").get<std::uint64_t>();
  rec.sample_index = j.at("index").get<std::uint64_t>();
  rec.scalars = j.at("scalars").get<std::map<std::string, double>>();
  rec.flags = j.at("flags").get<std::map<std::string, bool>>();
  rec.tie = j.at("tie").get<bool>();
  return rec;
}

inline std::string records_to_string(const std::vector<ExperimentRecord>& records) {
  std::string out;
  for (const ExperimentRecord& rec : records) {
    out += to_record_line(rec);
    out += '\n';
  }
  return out;
}

inline std::vector<ExperimentRecord> read_records(std::istream& is) {
  std::vector<ExperimentRecord> records;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    records.push_back(parse_record_line(line));
  }
  return records;
}

inline std::vector<ExperimentRecord> read_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open records file: " + path);
  return read_records(in);
}

/// Streaming writer: workers hand over completed samples as they finish; a
/// single owner appends them to the file in sample order, flushing on batch
/// boundaries, so an interrupted run leaves a cleanly parseable prefix.
class FileRecordSink : public RecordSink {
 public:
  explicit FileRecordSink(const std::string& path, std::int64_t flush_batch = 32)
      : out_(path, std::ios::binary | std::ios::trunc), flush_batch_(flush_batch) {
    if (!out_) throw io_error("cannot open records file for writing: " + path);
  }

  void emit(std::int64_t sample_index, const std::vector<ExperimentRecord>& records) override {
    std::string lines;
    for (const ExperimentRecord& rec : records) {
      lines += to_record_line(rec);
      lines += '\n';
    }
    std::lock_guard<std::mutex> lock(mutex_);
    pending_[sample_index] = std::move(lines);
    while (!pending_.empty() && pending_.begin()->first == next_) {
      out_ << pending_.begin()->second;
      pending_.erase(pending_.begin());
      ++next_;
      if (next_ % flush_batch_ == 0) out_.flush();
    }
  }

  /// Drains every buffered sample in index order (gaps included, after a
  /// failure) and flushes. Returns the number of samples written.
  std::int64_t finalize() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::int64_t written = next_;
    for (const auto& [index, lines] : pending_) {
      out_ << lines;
      ++written;
    }
    pending_.clear();
    out_.flush();
    if (!out_) throw io_error("records stream failed while writing");
    return written;
  }

 private:
  std::ofstream out_;
  std::mutex mutex_;
  std::map<std::int64_t, std::string> pending_;
  std::int64_t next_ = 0;
  std::int64_t flush_batch_;
};

namespace detail {

struct GroupKey {
  std::string kind;
  std::int32_t N;
  double epsilon;
  friend bool operator<(const GroupKey& a, const GroupKey& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.N != b.N ? a.N < b.N : a.epsilon < b.epsilon;
  }
};

}  // namespace detail

/// Per-(N, eps) aggregates recomputed purely from records: counts and means
/// with standard errors for every scalar and flag. This single code path
/// backs both the summary emitted by a run and the `report` subcommand, so
/// the two always agree byte for byte.
inline json summarize_records(const std::vector<ExperimentRecord>& records) {
  std::map<detail::GroupKey, std::vector<const ExperimentRecord*>> groups;
  for (const ExperimentRecord& rec : records)
    groups[{rec.kind, rec.N, rec.epsilon}].push_back(&rec);

  json out = json::array();
  for (const auto& [key, recs] : groups) {
    json g;
    g["N"] = key.N;
    g["eps"] = key.epsilon;
    g["kind"] = recs.front()->kind;
    g["samples"] = recs.size();
    std::int64_t ties = 0;
    for (const ExperimentRecord* rec : recs) ties += rec->tie;
    g["ties"] = ties;

    json scalars = json::object();
    for (const auto& [name, first_value] : recs.front()->scalars) {
      (void)first_value;
      std::vector<double> values;
      values.reserve(recs.size());
      for (const ExperimentRecord* rec : recs) values.push_back(rec->scalars.at(name));
      json s;
      s["mean"] = mean(values);
      s["se"] = values.size() > 1 ? standard_error(values) : 0.0;
      scalars[name] = s;
    }
    g["scalars"] = scalars;

    json flags = json::object();
    for (const auto& [name, first_value] : recs.front()->flags) {
      (void)first_value;
      std::int64_t count = 0;
      for (const ExperimentRecord* rec : recs) count += rec->flags.at(name);
      const double p = double(count) / double(recs.size());
      json f;
      f["count"] = count;
      f["fraction"] = p;
      f["se"] = wald_se(p, std::int64_t(recs.size()));
      flags[name] = f;
    }
    g["flags"] = flags;
    out.push_back(g);
  }
  return out;
}

/// CSV table with one row per (N, eps) group and one column per aggregate.
inline std::string summary_to_csv(const json& summary) {
  // Collect the union of column names first so every row is rectangular.
  std::vector<std::string> scalar_cols, flag_cols;
  for (const json& g : summary) {
    for (const auto& [name, value] : g.at("scalars").items()) {
      (void)value;
      if (std::find(scalar_cols.begin(), scalar_cols.end(), name) == scalar_cols.end())
        scalar_cols.push_back(name);
    }
    for (const auto& [name, value] : g.at("flags").items()) {
      (void)value;
      if (std::find(flag_cols.begin(), flag_cols.end(), name) == flag_cols.end())
        flag_cols.push_back(name);
    }
  }
  std::sort(scalar_cols.begin(), scalar_cols.end());
  std::sort(flag_cols.begin(), flag_cols.end());

  std::string csv = "kind,N,eps,samples,ties";
  for (const std::string& c : scalar_cols) csv += "," + c + "_mean," + c + "_se";
  for (const std::string& c : flag_cols) csv += "," + c + "_fraction," + c + "_se";
  csv += "\n";

  char buf[64];
  const auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  for (const json& g : summary) {
    csv += g.at("kind").get<std::string>();
    csv += "," + std::to_string(g.at("N").get<std::int32_t>());
    csv += "," + num(g.at("eps").get<double>());
    csv += "," + std::to_string(g.at("samples").get<std::int64_t>());
    csv += "," + std::to_string(g.at("ties").get<std::int64_t>());
    for (const std::string& c : scalar_cols) {
      if (g.at("scalars").contains(c)) {
        csv += "," + num(g.at("scalars").at(c).at("mean").get<double>());
        csv += "," + num(g.at("scalars").at(c).at("se").get<double>());
      } else {
        csv += ",,";
      }
    }
    for (const std::string& c : flag_cols) {
      if (g.at("flags").contains(c)) {
        csv += "," + num(g.at("flags").at(c).at("fraction").get<double>());
        csv += "," + num(g.at("flags").at(c).at("se").get<double>());
      } else {
        csv += ",,";
      }
    }
    csv += "\n";
  }
  return csv;
}

/// Line chart of log m_hat against N with error bars and the fitted decay
/// line, written as a self-contained SVG string.
inline std::string decay_svg(const std::vector<MnPoint>& points, bool fit_valid, double rate,
                             double rate_se, double intercept) {
  const double width = 640, height = 440;
  const double ml = 70, mr = 30, mt = 30, mb = 50;

  std::vector<const MnPoint*> usable;
  for (const MnPoint& p : points)
    if (p.m_hat > 0) usable.push_back(&p);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (usable.size() >= 1) {
    double x_min = 0, x_max = 1, y_min = 1e300, y_max = -1e300;
    for (const MnPoint* p : usable) {
      x_max = std::max(x_max, double(p->N));
      y_min = std::min(y_min, std::log(std::max(1e-12, p->m_hat - p->se)));
      y_max = std::max(y_max, std::log(p->m_hat + p->se));
    }
    y_min = std::min(y_min, -0.5);
    y_max = std::max(y_max, 0.0);
    x_max *= 1.05;

    const auto sx = [&](double n) { return ml + (n - x_min) / (x_max - x_min) * (width - ml - mr); };
    const auto sy = [&](double ln_m) {
      return mt + (y_max - ln_m) / (y_max - y_min) * (height - mt - mb);
    };

    // Axes.
    svg << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"14\">N</text>\n";
    svg << "<text x=\"18\" y=\"" << (mt + height - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 "
        << (mt + height - mb) / 2 << ")\">log m_N</text>\n";

    // Ticks: x at each N, y at integer log levels.
    for (const MnPoint* p : usable) {
      svg << "<line x1=\"" << sx(p->N) << "\" y1=\"" << height - mb << "\" x2=\"" << sx(p->N)
          << "\" y2=\"" << height - mb + 5 << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << sx(p->N) << "\" y=\"" << height - mb + 20
          << "\" text-anchor=\"middle\" font-size=\"12\">" << p->N << "</text>\n";
    }
    for (int level = 0; level >= int(std::floor(y_min)); --level) {
      if (level < y_min) break;
      svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(level) << "\" x2=\"" << ml
          << "\" y2=\"" << sy(level) << "\" stroke=\"black\"/>\n";
      svg << "<text x=\"" << ml - 8 << "\" y=\"" << sy(level) + 4
          << "\" text-anchor=\"end\" font-size=\"12\">" << level << "</text>\n";
    }

    // Fitted line.
    if (fit_valid) {
      const double y0 = intercept - rate * x_min;
      const double y1 = intercept - rate * x_max;
      svg << "<line x1=\"" << sx(x_min) << "\" y1=\"" << sy(y0) << "\" x2=\"" << sx(x_max)
          << "\" y2=\"" << sy(y1) << "\" stroke=\"#c44\" stroke-width=\"1.5\"/>\n";
      char label[96];
      std::snprintf(label, sizeof label, "rate c = %.4g (se %.2g)", rate, rate_se);
      svg << "<text x=\"" << width - mr - 8 << "\" y=\"" << mt + 16
          << "\" text-anchor=\"end\" font-size=\"13\" fill=\"#c44\">" << label << "</text>\n";
    }

    // Points with error bars.
    for (const MnPoint* p : usable) {
      const double x = sx(double(p->N));
      const double lo = sy(std::log(std::max(1e-12, p->m_hat - p->se)));
      const double hi = sy(std::log(p->m_hat + p->se));
      svg << "<line x1=\"" << x << "\" y1=\"" << lo << "\" x2=\"" << x << "\" y2=\"" << hi
          << "\" stroke=\"#246\"/>\n";
      svg << "<circle cx=\"" << x << "\" cy=\"" << sy(std::log(p->m_hat))
          << "\" r=\"3.2\" fill=\"#246\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace rfim

// Copyright 2026 The PrivKit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Text renderings of metric reports: CSV, Markdown metric tables, JSON, and
// SVG recall curves.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "privkit/metrics.hpp"
#include "privkit/optimizer.hpp"
#include "privkit/transfer_eval.hpp"

namespace privkit {

/// Provenance stamped into every emitted artifact.
struct ArtifactStamp {
  std::string config_hash;
  std::uint64_t seed = 0;
};

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

/// Shortest round-trip representation, used in CSV traces.
inline std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

enum class MetricContext { mi, oi };

struct MetricRow {
  std::string label;
  bool is_percentage = false;
  std::size_t k = 0;
  MetricContext context = MetricContext::mi;
};

/// Percentage, then Recall@k ascending with m.i. before o.i.
inline std::vector<MetricRow> metric_rows(std::vector<std::size_t> k_values) {
  std::sort(k_values.begin(), k_values.end());
  k_values.erase(std::unique(k_values.begin(), k_values.end()), k_values.end());
  std::vector<MetricRow> rows{{"Percentage", true, 0, MetricContext::mi}};
  for (std::size_t k : k_values) {
    rows.push_back({"Recall@" + std::to_string(k) + ": m.i.", false, k, MetricContext::mi});
    rows.push_back({"Recall@" + std::to_string(k) + ": o.i.", false, k, MetricContext::oi});
  }
  return rows;
}

inline double row_value(const MetricReport& r, const MetricRow& row) {
  if (row.is_percentage) return row.context == MetricContext::mi ? r.percentage : r.percentage_oi;
  const auto& m = row.context == MetricContext::mi ? r.recall_mi : r.recall_oi;
  auto it = m.find(row.k);
  PRIVKIT_REQUIRE(it != m.end(), "report for '" + r.backend_name + "' lacks Recall@" + std::to_string(row.k));
  return it->second;
}

inline std::string stamp_comment(const ArtifactStamp& s) {
  return "# config_hash=" + s.config_hash + " seed=" + std::to_string(s.seed) + "\n";
}

/// One row per (backend, metric, context).
inline std::string transfer_report_csv(const TransferReport& report, const ArtifactStamp& stamp) {
  std::ostringstream out;
  out << stamp_comment(stamp) << "backend,metric,k,context,value\n";
  for (const auto& name : report.evaluated) {
    const MetricReport& r = report.per_embedding.at(name);
    out << name << ",percentage,,m.i.," << fixed(r.percentage, 6) << "\n";
    out << name << ",percentage,,o.i.," << fixed(r.percentage_oi, 6) << "\n";
    for (std::size_t k : r.k_values) {
      out << name << ",recall," << k << ",m.i.," << fixed(r.recall_mi.at(k), 6) << "\n";
      out << name << ",recall," << k << ",o.i.," << fixed(r.recall_oi.at(k), 6) << "\n";
    }
  }
  out << "transfer_recall,recall," << kTransferK << ",m.i.,"
      << (report.transfer_recall ? fixed(*report.transfer_recall, 6) : "") << "\n";
  return out.str();
}

/// Markdown table: metric rows x columns. Each column is a (header, report)
/// pair; values print with three decimals.
inline std::string metric_table_markdown(const std::vector<std::pair<std::string, const MetricReport*>>& columns,
                                         const std::vector<std::size_t>& k_values) {
  std::ostringstream out;
  out << "| Metric |";
  for (const auto& [header, _] : columns) out << " " << header << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---:|";
  out << "\n";
  for (const auto& row : metric_rows(k_values)) {
    out << "| " << row.label << " |";
    for (const auto& [_, report] : columns) out << " " << fixed(row_value(*report, row), 3) << " |";
    out << "\n";
  }
  return out.str();
}

inline std::string transfer_recall_text(const std::optional<double>& tr) {
  return tr ? fixed(*tr, 2) : std::string("n/a");
}

/// A single variant: one column per evaluation backend.
inline std::string transfer_report_markdown(const std::string& variant, const TransferReport& report,
                                            const ArtifactStamp& stamp) {
  std::vector<std::pair<std::string, const MetricReport*>> columns;
  std::vector<std::size_t> k_values;
  for (const auto& name : report.evaluated) {
    const MetricReport& r = report.per_embedding.at(name);
    const bool optimized = std::find(report.optimized_set.begin(), report.optimized_set.end(), name) !=
                           report.optimized_set.end();
    columns.emplace_back(optimized ? name + " (optimized)" : name, &r);
    k_values = r.k_values;
  }
  std::ostringstream out;
  out << "# " << variant << "\n\n" << metric_table_markdown(columns, k_values) << "\n";
  out << "Transfer recall (mean Recall@10 m.i. over non-optimized embeddings): "
      << transfer_recall_text(report.transfer_recall) << "\n\n";
  out << "config_hash: " << stamp.config_hash << ", seed: " << stamp.seed << "\n";
  return out.str();
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json mi = nlohmann::json::object(), oi = nlohmann::json::object();
  for (const auto& [k, v] : r.recall_mi) mi[std::to_string(k)] = v;
  for (const auto& [k, v] : r.recall_oi) oi[std::to_string(k)] = v;
  return {{"backend_name", r.backend_name}, {"k_values", r.k_values},   {"recall_mi", mi},
          {"recall_oi", oi},                {"percentage", r.percentage}, {"percentage_oi", r.percentage_oi},
          {"n_queries", r.n_queries},       {"n_gallery", r.n_gallery}, {"n_confounders", r.n_confounders},
          {"n_excluded", r.n_excluded}};
}

inline MetricReport metric_report_from_json(const nlohmann::json& j) {
  MetricReport r;
  j.at("backend_name").get_to(r.backend_name);
  j.at("k_values").get_to(r.k_values);
  for (const auto& [k, v] : j.at("recall_mi").items()) r.recall_mi[std::stoul(k)] = v.get<double>();
  for (const auto& [k, v] : j.at("recall_oi").items()) r.recall_oi[std::stoul(k)] = v.get<double>();
  j.at("percentage").get_to(r.percentage);
  j.at("percentage_oi").get_to(r.percentage_oi);
  j.at("n_queries").get_to(r.n_queries);
  j.at("n_gallery").get_to(r.n_gallery);
  j.at("n_confounders").get_to(r.n_confounders);
  j.at("n_excluded").get_to(r.n_excluded);
  return r;
}

inline nlohmann::json to_json(const TransferReport& t, const ArtifactStamp& stamp) {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, r] : t.per_embedding) per[name] = to_json(r);
  return {{"evaluated", t.evaluated},
          {"optimized_set", t.optimized_set},
          {"per_embedding", per},
          {"transfer_recall", t.transfer_recall ? nlohmann::json(*t.transfer_recall) : nlohmann::json(nullptr)},
          {"config_hash", stamp.config_hash},
          {"seed", stamp.seed}};
}

inline TransferReport transfer_report_from_json(const nlohmann::json& j) {
  TransferReport t;
  j.at("evaluated").get_to(t.evaluated);
  j.at("optimized_set").get_to(t.optimized_set);
  for (const auto& [name, r] : j.at("per_embedding").items()) t.per_embedding[name] = metric_report_from_json(r);
  if (!j.at("transfer_recall").is_null()) t.transfer_recall = j.at("transfer_recall").get<double>();
  return t;
}

/// Recall-vs-k curves for one backend, both contexts, log-spaced k axis.
inline std::string recall_curve_svg(const MetricReport& r, const std::string& title) {
  const double w = 480, h = 320, left = 56, right = 16, top = 36, bottom = 44;
  const double pw = w - left - right, ph = h - top - bottom;
  std::vector<std::size_t> ks = r.k_values;
  const double lo = std::log(static_cast<double>(std::max<std::size_t>(ks.front(), 1)));
  const double hi = std::log(static_cast<double>(std::max<std::size_t>(ks.back(), 1)));
  auto xpos = [&](std::size_t k) {
    const double span = hi > lo ? hi - lo : 1.0;
    return left + pw * (std::log(static_cast<double>(k)) - lo) / span;
  };
  auto ypos = [&](double v) { return top + ph * (1.0 - v / 100.0); };
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  for (int v = 0; v <= 100; v += 25) {
    out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(ypos(v) + 4, 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << v << "</text>\n";
  }
  for (std::size_t k : ks) {
    out << "<text x=\"" << fixed(xpos(k), 1) << "\" y=\"" << top + ph + 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << k << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 8
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">k</text>\n";
  auto curve = [&](const std::map<std::size_t, double>& m, const char* color, const char* label, int row) {
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k : ks) out << fixed(xpos(k), 1) << "," << fixed(ypos(m.at(k)), 1) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << left + 8 << "\" y=\"" << top + 12 + 14 * row << "\" fill=\"" << color
        << "\" font-family=\"sans-serif\" font-size=\"11\">Recall@k " << label << "</text>\n";
  };
  curve(r.recall_mi, "#c0392b", "m.i.", 0);
  curve(r.recall_oi, "#2c7fb8", "o.i.", 1);
  out << "</svg>\n";
  return out.str();
}

/// Loss trace CSV: iteration,total,perceptual,embedding.
inline std::string trace_csv(const std::vector<TracePoint>& trace, const ArtifactStamp& stamp) {
  std::ostringstream out;
  out << stamp_comment(stamp) << "iteration,total,perceptual,embedding\n";
  for (const auto& p : trace) {
    out << p.iteration << "," << exact(p.total) << "," << exact(p.perceptual) << "," << exact(p.embedding) << "\n";
  }
  return out.str();
}

}  // namespace privkit

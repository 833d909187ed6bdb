#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "earkd/errors.hpp"
#include "earkd/evaluation.hpp"
#include "manifest.hpp"
#include "run_io.hpp"

namespace earkd::cli {
namespace fs = std::filesystem;

namespace {

struct Row {
  std::string arch;
  std::string strategy;
  std::string domain;
  ConfusionMatrix pooled;
  std::size_t runs = 0;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string arch_label(const std::string& arch) {
  if (arch == "cnn") return "CNN";
  if (arch == "transformer") return "Transformer";
  return arch;
}

std::string modality_label(const std::string& domain) { return domain == "scalp" ? "Scalp-EEG" : "Ear-EEG"; }

std::string method_label(const std::string& strategy) {
  if (strategy == "supervised-scalp" || strategy == "supervised-ear") return "Supervised";
  if (strategy == "transfer") return "Transfer learning";
  if (strategy == "kd-offline") return "Offline KD";
  if (strategy == "kd-online") return "Online KD";
  return strategy.empty() ? "unlabelled" : strategy;
}

// Sort key: architecture, then the fixed strategy order.
std::pair<std::string, std::size_t> row_order(const Row& r) {
  std::size_t rank = kAllStrategies.size();
  if (const auto s = parse_strategy(r.strategy)) {
    rank = static_cast<std::size_t>(std::find(kAllStrategies.begin(), kAllStrategies.end(), *s) -
                                    kAllStrategies.begin());
  }
  return {r.arch, rank};
}

std::string scatter_svg(const std::vector<EmbeddingPoint>& points, const std::string& title) {
  constexpr double kSize = 480.0;
  constexpr double kMargin = 40.0;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!points.empty()) {
    x0 = x1 = points.front().x;
    y0 = y1 = points.front().y;
    for (const auto& p : points) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  }
  const double sx = (kSize - 2 * kMargin) / std::max(x1 - x0, 1e-12);
  const double sy = (kSize - 2 * kMargin) / std::max(y1 - y0, 1e-12);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n"
      << "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n"
      << "<text x=\"240\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
      << xml_escape(title) << "</text>\n";
  for (const auto& p : points) {
    const char* colour = p.domain == "scalp" ? "#1f77b4" : "#d62728";
    svg << "<circle class=\"point\" cx=\"" << fmt("%.2f", kMargin + (p.x - x0) * sx) << "\" cy=\""
        << fmt("%.2f", kSize - kMargin - (p.y - y0) * sy) << "\" r=\"2.5\" fill=\"" << colour
        << "\" fill-opacity=\"0.7\"><title>" << p.stage << " " << p.domain << "</title></circle>\n";
  }
  svg << "<rect x=\"360\" y=\"34\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>"
      << "<text x=\"376\" y=\"43\" font-family=\"sans-serif\" font-size=\"11\">scalp teacher</text>\n"
      << "<rect x=\"360\" y=\"50\" width=\"10\" height=\"10\" fill=\"#d62728\"/>"
      << "<text x=\"376\" y=\"59\" font-family=\"sans-serif\" font-size=\"11\">model</text>\n"
      << "</svg>\n";
  return svg.str();
}

}  // namespace

void run_report(const ReportOptions& o, const Invocation& inv) {
  if (o.runs.empty()) throw Error(ErrorKind::UsageError, "report needs at least one --runs directory");

  RunManifest manifest("report", inv.arguments);
  std::vector<Row> rows;
  for (const auto& run : o.runs) {
    const auto metrics = read_json(run / "metrics.json");
    const auto cm = parse_confusion_csv(run / "confusion.csv");
    manifest.add_input(run / "metrics.json");
    manifest.add_input(run / "confusion.csv");
    Row key;
    key.arch = metrics.value("arch", "");
    key.strategy = metrics.contains("strategy") && metrics["strategy"].is_string()
                       ? metrics["strategy"].get<std::string>()
                       : "";
    key.domain = metrics.value("domain", "ear");
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& r) {
      return r.arch == key.arch && r.strategy == key.strategy && r.domain == key.domain;
    });
    if (it == rows.end()) {
      rows.push_back(key);
      it = rows.end() - 1;
    }
    it->pooled += cm;
    ++it->runs;
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return row_order(a) < row_order(b); });

  std::ostringstream md;
  std::ostringstream csv;
  md << "| Architecture | Modality | Method | ACC (%) | κ | Runs | Epochs |\n"
     << "|---|---|---|---|---|---|---|\n";
  csv << "architecture,modality,method,strategy,accuracy,kappa,runs,epochs\n";
  for (const auto& r : rows) {
    const auto report = evaluation::metrics_report(r.pooled);
    md << "| " << arch_label(r.arch) << " | " << modality_label(r.domain) << " | " << method_label(r.strategy)
       << " | " << fmt("%.2f", 100.0 * report.accuracy) << " | " << fmt("%.3f", report.kappa) << " | "
       << r.runs << " | " << report.epochs << " |\n";
    csv << arch_label(r.arch) << ',' << modality_label(r.domain) << ',' << method_label(r.strategy) << ','
        << r.strategy << ',' << fmt("%.6f", report.accuracy) << ',' << fmt("%.6f", report.kappa) << ','
        << r.runs << ',' << report.epochs << '\n';
  }
  write_text(o.out / "table.md", md.str());
  write_text(o.out / "table.csv", csv.str());
  manifest.add_output(o.out / "table.md");
  manifest.add_output(o.out / "table.csv");

  for (std::size_t i = 0; i < o.runs.size(); ++i) {
    const fs::path csv_path = o.runs[i] / "embedding.csv";
    if (!fs::exists(csv_path)) continue;
    const auto points = parse_embedding_csv(csv_path);
    const std::string name = o.runs[i].filename().empty() ? o.runs[i].parent_path().filename().string()
                                                          : o.runs[i].filename().string();
    const fs::path svg = o.out / ("embedding_" + std::to_string(i) + "_" + name + ".svg");
    write_text(svg, scatter_svg(points, name));
    manifest.add_input(csv_path);
    manifest.add_output(svg);
  }
  manifest.write(o.out);
  std::cout << md.str();
}

}  // namespace earkd::cli

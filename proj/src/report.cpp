#include "pcdgan/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>
#include <tuple>

#include "pcdgan/error.hpp"
#include "pcdgan/synthetic.hpp"
#include "pcdgan/train.hpp"

namespace fs = std::filesystem;

namespace pcdgan::app {

namespace {

std::string g9(double v) { return fmt::format("{:.9g}", v); }

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("file not found: " + path.string());
  return in;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

// Rows of a headed CSV, skipping '#' lines, as numbers keyed by column name.
std::vector<std::map<std::string, double>> read_csv(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (header.empty()) {
      header = cells;
      continue;
    }
    if (cells.size() != header.size()) {
      throw LoadError(fmt::format("{}: row has {} cells, header has {}", path.string(), cells.size(),
                                  header.size()));
    }
    std::map<std::string, double> row;
    for (std::size_t i = 0; i < cells.size(); ++i) row[header[i]] = std::stod(cells[i]);
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string svg_open(int w, int h) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      w, h);
}

std::string f3(double v) { return fmt::format("{:.3f}", v); }

// Maps q in [0, ~1.05] to a light-to-dark blue.
std::string level_color(int level, int levels) {
  const double s = static_cast<double>(level) / static_cast<double>(levels - 1);
  const int r = static_cast<int>(std::lround(247 - s * (247 - 8)));
  const int g = static_cast<int>(std::lround(251 - s * (251 - 69)));
  const int b = static_cast<int>(std::lround(255 - s * (255 - 148)));
  return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
}

std::string scatter_svg(const std::string& title, const std::vector<std::map<std::string, double>>& pts) {
  constexpr int kSize = 480, kPad = 50, kCells = 96, kLevels = 10;
  constexpr double kLo = -0.8, kHi = 0.8;
  auto px = [&](double x) { return kPad + (x - kLo) / (kHi - kLo) * kSize; };
  auto py = [&](double y) { return kPad + (kHi - y) / (kHi - kLo) * kSize; };

  std::string s = svg_open(kSize + 2 * kPad, kSize + 2 * kPad);
  s += fmt::format("<text x=\"{}\" y=\"30\" text-anchor=\"middle\">{}</text>\n", kPad + kSize / 2, title);
  const double cell = (kHi - kLo) / kCells;
  const double qmax = synthetic::quality_value(synthetic::mode_center(0)[0], synthetic::mode_center(0)[1]);
  for (int i = 0; i < kCells; ++i) {
    for (int j = 0; j < kCells; ++j) {
      const double x = kLo + (i + 0.5) * cell, y = kLo + (j + 0.5) * cell;
      const double q = synthetic::quality_value(x, y) / qmax;
      const int level = std::min(kLevels - 1, static_cast<int>(q * kLevels));
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                       f3(px(kLo + i * cell)), f3(py(kLo + (j + 1) * cell)), f3(cell / (kHi - kLo) * kSize + 0.05),
                       f3(cell / (kHi - kLo) * kSize + 0.05), level_color(level, kLevels));
    }
  }
  for (int k = 0; k < synthetic::kModes; ++k) {
    const auto c = synthetic::mode_center(k);
    s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"#555\" "
                     "stroke-dasharray=\"4 3\"/>\n",
                     f3(px(c[0])), f3(py(c[1])), f3(0.25 / (kHi - kLo) * kSize));
  }
  for (const auto& p : pts) {
    s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"1.6\" fill=\"#d62728\" fill-opacity=\"0.7\"/>\n",
                     f3(px(p.at("x1"))), f3(py(p.at("x2"))));
  }
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   kPad, kPad, kSize, kSize);
  for (double t = -0.8; t <= 0.8 + 1e-9; t += 0.4) {
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.1f}</text>\n", f3(px(t)),
                     kPad + kSize + 16, t);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.1f}</text>\n", kPad - 6,
                     f3(py(t) + 4), t);
  }
  s += "</svg>\n";
  return s;
}

struct Band {
  std::string label;
  std::vector<double> x, mean, std;
};

std::string curves_svg(const std::string& metric, const std::vector<Band>& bands) {
  constexpr int kW = 640, kH = 400, kL = 70, kR = 180, kT = 40, kB = 50;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& b : bands) {
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      lo = std::min(lo, b.mean[i] - b.std[i]);
      hi = std::max(hi, b.mean[i] + b.std[i]);
    }
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double margin = 0.05 * (hi - lo);
  lo -= margin;
  hi += margin;
  const int pw = kW - kL - kR, ph = kH - kT - kB;
  auto px = [&](double x) { return kL + x * pw; };
  auto py = [&](double y) { return kT + (hi - y) / (hi - lo) * ph; };

  std::string s = svg_open(kW, kH);
  s += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\">{} vs condition</text>\n",
                   kL + pw / 2, metric);
  for (std::size_t r = 0; r < bands.size(); ++r) {
    const auto& b = bands[r];
    const char* color = kPalette[r % std::size(kPalette)];
    std::string poly;
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      poly += fmt::format("{},{} ", f3(px(b.x[i])), f3(py(b.mean[i] + b.std[i])));
    }
    for (std::size_t i = b.x.size(); i-- > 0;) {
      poly += fmt::format("{},{} ", f3(px(b.x[i])), f3(py(b.mean[i] - b.std[i])));
    }
    s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                     poly, color);
    std::string line;
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      line += fmt::format("{},{} ", f3(px(b.x[i])), f3(py(b.mean[i])));
    }
    s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                     line, color);
    const int ly = kT + 16 + static_cast<int>(r) * 18;
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"10\" fill=\"{}\"/>\n", kW - kR + 12,
                     ly - 9, color);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kW - kR + 32, ly, b.label);
  }
  s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                   kL, kT, pw, ph);
  for (int i = 0; i <= 5; ++i) {
    const double x = i / 5.0;
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{:.1f}</text>\n", f3(px(x)),
                     kT + ph + 16, x);
    const double y = lo + (hi - lo) * i / 5.0;
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", kL - 6,
                     f3(py(y) + 4), y);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">condition</text>\n", kL + pw / 2,
                   kH - 10);
  s += "</svg>\n";
  return s;
}

}  // namespace

RunSummary read_summary(const std::string& run_dir) {
  std::ifstream in = open_input(fs::path(run_dir) / "summary.json");
  const nlohmann::json j = nlohmann::json::parse(in);
  RunSummary r;
  r.run_dir = run_dir;
  r.run_id = j.at("run_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.example_id = j.at("example").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  auto metric = [&](const char* key) {
    return eval::MetricStats{j.at(key).at("mean").get<double>(), j.at(key).at("std").get<double>()};
  };
  r.label_error = metric("label_error");
  r.likelihood = metric("likelihood");
  r.diversity = metric("diversity");
  r.modes_covered = j.at("mode_occupancy").at("covered").get<std::size_t>();
  return r;
}

std::vector<GroupSummary> group_summaries(const std::vector<RunSummary>& runs) {
  std::map<std::pair<int, std::string>, std::vector<const RunSummary*>> groups;
  for (const auto& r : runs) groups[{r.example_id, r.model}].push_back(&r);
  std::vector<GroupSummary> out;
  for (const auto& [key, members] : groups) {
    GroupSummary g;
    g.example_id = key.first;
    g.model = key.second;
    g.runs = members.size();
    std::vector<double> le, lik, div;
    for (const RunSummary* r : members) {
      le.push_back(r->label_error.mean);
      lik.push_back(r->likelihood.mean);
      div.push_back(r->diversity.mean);
      g.modes_covered += static_cast<double>(r->modes_covered);
    }
    g.label_error = eval::stats(le);
    g.likelihood = eval::stats(lik);
    g.diversity = eval::stats(div);
    g.modes_covered /= static_cast<double>(members.size());
    out.push_back(g);
  }
  return out;
}

std::vector<GroupSummary> compare(const std::vector<std::string>& run_dirs,
                                  const std::string& out_csv) {
  std::vector<RunSummary> runs;
  for (const auto& d : run_dirs) runs.push_back(read_summary(d));
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    return std::tie(a.example_id, a.model, a.seed, a.run_id) <
           std::tie(b.example_id, b.model, b.seed, b.run_id);
  });
  const auto groups = group_summaries(runs);

  std::string text =
      "scope,example,model,seed,runs,label_error_mean,label_error_std,likelihood_mean,"
      "likelihood_std,diversity_mean,diversity_std,modes_covered\n";
  for (const auto& r : runs) {
    text += fmt::format("run:{},{},{},{},1,{},{},{},{},{},{},{}\n", r.run_id, r.example_id, r.model,
                        r.seed, g9(r.label_error.mean), g9(r.label_error.std),
                        g9(r.likelihood.mean), g9(r.likelihood.std), g9(r.diversity.mean),
                        g9(r.diversity.std), r.modes_covered);
  }
  for (const auto& g : groups) {
    text += fmt::format("seed_mean,{},{},,{},{},{},{},{},{},{},{}\n", g.example_id, g.model, g.runs,
                        g9(g.label_error.mean), g9(g.label_error.std), g9(g.likelihood.mean),
                        g9(g.likelihood.std), g9(g.diversity.mean), g9(g.diversity.std),
                        g9(g.modes_covered));
  }
  const fs::path out(out_csv);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, text);
  return groups;
}

std::vector<std::string> emit_plots(const std::vector<std::string>& run_dirs,
                                    const std::string& out_dir) {
  if (run_dirs.empty()) throw ContractViolation("plot: no run directories given");
  fs::create_directories(out_dir);
  std::vector<std::string> written;

  std::vector<std::string> ids;
  std::vector<std::vector<std::map<std::string, double>>> cells;
  for (const auto& d : run_dirs) {
    const fs::path dir(d);
    const std::string id = fs::path(d).filename().empty() ? fs::path(d).parent_path().filename().string()
                                                          : fs::path(d).filename().string();
    ids.push_back(id);
    cells.push_back(read_csv(dir / "eval.csv"));
    const auto samples = read_csv(dir / "samples_c0.4.csv");
    const fs::path path = fs::path(out_dir) / fmt::format("scatter_{}.svg", id);
    write_text(path, scatter_svg(fmt::format("{}: {} samples at condition {}", id, samples.size(),
                                             kScatterCondition),
                                 samples));
    written.push_back(path.string());
  }

  for (const char* metric : {"label_error", "likelihood", "diversity"}) {
    std::vector<Band> bands;
    for (std::size_t r = 0; r < cells.size(); ++r) {
      std::map<double, std::vector<double>> by_condition;
      for (const auto& c : cells[r]) by_condition[c.at("condition")].push_back(c.at(metric));
      Band b;
      b.label = ids[r];
      for (const auto& [cond, vals] : by_condition) {
        const eval::MetricStats st = eval::stats(vals);
        b.x.push_back(cond);
        b.mean.push_back(st.mean);
        b.std.push_back(st.std);
      }
      bands.push_back(std::move(b));
    }
    const fs::path path = fs::path(out_dir) / fmt::format("metric_{}.svg", metric);
    write_text(path, curves_svg(metric, bands));
    written.push_back(path.string());
  }
  return written;
}

}  // namespace pcdgan::app

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Core>
#include <fmt/format.h>

#include "qclimit/experiments.hpp"

namespace qclimit {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  out.close();
  if (!out) throw IoError("short write to " + p.string());
}

std::string compiler_id() {
#if defined(__clang__)
  return fmt::format("clang {}.{}.{}", __clang_major__, __clang_minor__, __clang_patchlevel__);
#elif defined(__GNUC__)
  return fmt::format("gcc {}.{}.{}", __GNUC__, __GNUC_MINOR__, __GNUC_PATCHLEVEL__);
#else
  return "unknown";
#endif
}

}  // namespace

std::string Report::to_csv() const {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += std::isfinite(row[c]) ? fmt::format("{:.17g}", row[c]) : std::string("nan");
    }
    out += '\n';
  }
  return out;
}

json Report::to_json() const {
  json r = json::array();
  for (const auto& row : rows) {
    json jr = json::array();
    for (double v : row) jr.push_back(number(v));
    r.push_back(jr);
  }
  return {{"kind", kind}, {"columns", columns}, {"rows", r}, {"summary", summary}, {"flags", flags}};
}

Report Report::from_json(const json& j) {
  Report r;
  try {
    r.kind = j.at("kind").get<std::string>();
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& jr : j.at("rows")) {
      std::vector<double> row;
      for (const auto& v : jr)
        row.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
      r.rows.push_back(std::move(row));
    }
    r.summary = j.value("summary", json::object());
    r.flags = j.value("flags", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

std::size_t Report::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == name) return c;
  throw InvalidArgument("report has no column " + name);
}

double Report::at(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

void write_outputs(const std::string& dir, const Report& report, const RunMeta& meta) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory {}: {}", dir, ec.message()));
  write_file(fs::path(dir) / "report.csv", report.to_csv());
  write_file(fs::path(dir) / "report.json", report.to_json().dump(2) + "\n");
  json m = {{"command", meta.command},
            {"config_hash", meta.config_hash},
            {"versions",
             {{"qclimit", kVersion},
              {"eigen", fmt::format("{}.{}.{}", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION,
                                    EIGEN_MINOR_VERSION)},
              {"fmt", FMT_VERSION},
              {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                            NLOHMANN_JSON_VERSION_MINOR,
                                            NLOHMANN_JSON_VERSION_PATCH)},
              {"compiler", compiler_id()}}},
            {"threads", meta.threads},
            {"timings", {{"total_seconds", meta.seconds}, {"row_seconds", meta.row_seconds}}}};
  write_file(fs::path(dir) / "meta.json", m.dump(2) + "\n");
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("fit abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return f;
}

std::vector<double> distinct_levels(const std::vector<double>& ev, double gap, int min_size) {
  std::vector<double> levels;
  std::size_t i = 0;
  while (i < ev.size()) {
    std::size_t j = i + 1;
    while (j < ev.size() && ev[j] - ev[j - 1] < gap) ++j;
    // median: edge states drift upward out of a bulk level, the bulk stays put
    if (static_cast<int>(j - i) >= min_size) {
      std::size_t n = j - i;
      levels.push_back(n % 2 ? ev[i + n / 2] : 0.5 * (ev[i + n / 2 - 1] + ev[i + n / 2]));
    }
    i = j;
  }
  return levels;
}

}  // namespace qclimit

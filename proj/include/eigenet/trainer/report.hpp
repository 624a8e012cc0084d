#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "eigenet/trainer/evaluate.hpp"

namespace eigenet::trainer {

// ---------------------------------------------------------------- csv

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Rows of a CSV file keyed by its header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorKind::MissingArtifact, "CSV has no column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
  const std::string& at(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
  double number(std::size_t row, const std::string& name) const { return std::stod(at(row, name)); }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::MissingArtifact, "cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    require(cells.size() == t.header.size(), ErrorKind::ShapeMismatch, "ragged CSV row in " + path.string());
    t.rows.push_back(std::move(cells));
  }
  return t;
}

inline std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(9) << v;
  return o.str();
}

/// One row per (method, K) with the three mean errors.
inline void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path);
  out << "method,k,edt_error_s,c50_error_db,t60_error_pct,count,excluded,exclusion_rate\n";
  for (const auto& row : r.rows)
    out << row.method << ',' << row.k << ',' << fmt(row.mean.edt) << ',' << fmt(row.mean.c50) << ','
        << fmt(row.mean.t60) << ',' << row.count << ',' << row.excluded << ',' << fmt(row.exclusion_rate) << '\n';
}

inline std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  std::vector<MetricRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    MetricRow r;
    r.method = t.at(i, "method");
    r.k = std::stoi(t.at(i, "k"));
    r.mean = {t.number(i, "edt_error_s"), t.number(i, "c50_error_db"), t.number(i, "t60_error_pct")};
    r.count = std::stoul(t.at(i, "count"));
    r.excluded = std::stoul(t.at(i, "excluded"));
    r.exclusion_rate = t.number(i, "exclusion_rate");
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Per-octave-band breakdown, one row per (method, K, band).
inline void write_bands_csv(const std::filesystem::path& path, const MetricsReport& r) {
  const acoustics::OctaveBank bank;
  std::ofstream out(path);
  out << "method,k,band_hz,edt_error_s,c50_error_db,t60_error_pct\n";
  for (const auto& row : r.rows)
    for (std::size_t b = 0; b < row.bands.size(); ++b)
      out << row.method << ',' << row.k << ',' << fmt(bank.center_frequencies[b]) << ',' << fmt(row.bands[b].edt)
          << ',' << fmt(row.bands[b].c50) << ',' << fmt(row.bands[b].t60) << '\n';
}

inline void write_probe_csv(const std::filesystem::path& path, const std::vector<ProbeRow>& rows) {
  std::ofstream out(path);
  out << "mode,keep,edt_error_s,c50_error_db,t60_error_pct,count,excluded\n";
  for (const auto& r : rows)
    out << r.mode << ',' << r.keep << ',' << fmt(r.mean.edt) << ',' << fmt(r.mean.c50) << ',' << fmt(r.mean.t60)
        << ',' << r.count << ',' << r.excluded << '\n';
}

// ---------------------------------------------------------------- svg

struct Series {
  std::string name;
  std::vector<double> values;
};

namespace detail {

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
  return colors[i % 7];
}

inline std::string escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

struct Frame {
  double width = 520, height = 340, left = 60, right = 150, top = 36, bottom = 48;
  double lo = 0, hi = 1;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y(double v) const { return top + plot_h() * (1.0 - (v - lo) / (hi - lo)); }
};

inline void value_range(const std::vector<Series>& series, Frame& f) {
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& s : series)
    for (double v : s.values)
      if (std::isfinite(v)) {
        hi = any ? std::max(hi, v) : v;
        lo = any ? std::min(lo, v) : std::min(0.0, v);
        any = true;
      }
  if (!any || hi <= lo) hi = lo + 1.0;
  f.lo = lo;
  f.hi = hi + 0.05 * (hi - lo);
}

inline void axes(std::ostringstream& o, const Frame& f, const std::string& title, const std::string& ylabel) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << f.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  o << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\"" << f.top + f.plot_h()
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << f.left << "\" y1=\"" << f.top + f.plot_h() << "\" x2=\"" << f.left + f.plot_w()
    << "\" y2=\"" << f.top + f.plot_h() << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 4.0;
    o << "<text x=\"" << f.left - 6 << "\" y=\"" << f.y(v) + 4 << "\" text-anchor=\"end\">" << fmt(std::round(v * 1000) / 1000)
      << "</text>\n";
  }
  o << "<text x=\"14\" y=\"" << f.top + f.plot_h() / 2 << "\" transform=\"rotate(-90 14 " << f.top + f.plot_h() / 2
    << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

inline void legend(std::ostringstream& o, const Frame& f, const std::vector<Series>& series) {
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = f.top + 16.0 * static_cast<double>(i);
    o << "<rect x=\"" << f.width - f.right + 12 << "\" y=\"" << y << "\" width=\"10\" height=\"10\" fill=\""
      << palette(i) << "\"/>\n";
    o << "<text x=\"" << f.width - f.right + 28 << "\" y=\"" << y + 9 << "\">" << escape(series[i].name)
      << "</text>\n";
  }
}

}  // namespace detail

/// Line chart of one metric against K, one line per method.
inline std::string svg_line_chart(const std::string& title, const std::string& ylabel, const std::vector<double>& x,
                                  const std::vector<Series>& series) {
  detail::Frame f;
  detail::value_range(series, f);
  std::ostringstream o;
  detail::axes(o, f, title, ylabel);
  const auto px = [&](std::size_t i) {
    return x.size() < 2 ? f.left + f.plot_w() / 2
                        : f.left + 20 + (f.plot_w() - 40) * static_cast<double>(i) / static_cast<double>(x.size() - 1);
  };
  for (std::size_t i = 0; i < x.size(); ++i)
    o << "<text x=\"" << px(i) << "\" y=\"" << f.top + f.plot_h() + 18 << "\" text-anchor=\"middle\">K="
      << fmt(x[i]) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < series[s].values.size() && i < x.size(); ++i)
      if (std::isfinite(series[s].values[i])) pts << px(i) << ',' << f.y(series[s].values[i]) << ' ';
    o << "<polyline fill=\"none\" stroke=\"" << detail::palette(s) << "\" stroke-width=\"2\" points=\"" << pts.str()
      << "\"/>\n";
    for (std::size_t i = 0; i < series[s].values.size() && i < x.size(); ++i)
      if (std::isfinite(series[s].values[i]))
        o << "<circle cx=\"" << px(i) << "\" cy=\"" << f.y(series[s].values[i]) << "\" r=\"3\" fill=\""
          << detail::palette(s) << "\"/>\n";
  }
  detail::legend(o, f, series);
  o << "</svg>\n";
  return o.str();
}

/// Grouped bar chart: one group per category, one bar per series.
inline std::string svg_bar_chart(const std::string& title, const std::string& ylabel,
                                 const std::vector<std::string>& groups, const std::vector<Series>& series) {
  detail::Frame f;
  f.width = 640;
  detail::value_range(series, f);
  std::ostringstream o;
  detail::axes(o, f, title, ylabel);
  const double gw = f.plot_w() / std::max<std::size_t>(groups.size(), 1);
  const double bw = gw * 0.8 / std::max<std::size_t>(series.size(), 1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = f.left + gw * static_cast<double>(g);
    o << "<text x=\"" << gx + gw / 2 << "\" y=\"" << f.top + f.plot_h() + 18 << "\" text-anchor=\"middle\">"
      << detail::escape(groups[g]) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
      if (g >= series[s].values.size() || !std::isfinite(series[s].values[g])) continue;
      const double v = series[s].values[g];
      const double y0 = f.y(std::max(v, f.lo)), base = f.y(f.lo);
      o << "<rect x=\"" << gx + gw * 0.1 + bw * static_cast<double>(s) << "\" y=\"" << std::min(y0, base)
        << "\" width=\"" << bw << "\" height=\"" << std::abs(base - y0) << "\" fill=\"" << detail::palette(s)
        << "\"/>\n";
    }
  }
  detail::legend(o, f, series);
  o << "</svg>\n";
  return o.str();
}

inline const std::vector<std::pair<std::string, std::string>>& metric_columns() {
  static const std::vector<std::pair<std::string, std::string>> cols{
      {"edt_error_s", "EDT error (s)"}, {"c50_error_db", "C50 error (dB)"}, {"t60_error_pct", "T60 error (%)"}};
  return cols;
}

/// Renders k_scaling_<metric>.svg from a metrics CSV. Returns the files written.
inline std::vector<std::filesystem::path> render_k_scaling(const std::filesystem::path& csv,
                                                           const std::filesystem::path& out_dir) {
  const auto t = read_csv(csv);
  std::vector<std::string> methods;
  std::vector<double> ks;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& m = t.at(i, "method");
    if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    const double k = t.number(i, "k");
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }
  std::sort(ks.begin(), ks.end());
  std::vector<std::filesystem::path> written;
  for (const auto& [col, label] : metric_columns()) {
    std::vector<Series> series;
    for (const auto& m : methods) {
      Series s{m, std::vector<double>(ks.size(), std::numeric_limits<double>::quiet_NaN())};
      for (std::size_t i = 0; i < t.rows.size(); ++i)
        if (t.at(i, "method") == m) {
          const auto pos = std::find(ks.begin(), ks.end(), t.number(i, "k")) - ks.begin();
          s.values[static_cast<std::size_t>(pos)] = t.number(i, col);
        }
      series.push_back(std::move(s));
    }
    const auto path = out_dir / ("k_scaling_" + col + ".svg");
    std::ofstream(path) << svg_line_chart(label + " vs K", label, ks, series);
    written.push_back(path);
  }
  return written;
}

/// Renders bands_<metric>_k<K>.svg from a per-band CSV.
inline std::vector<std::filesystem::path> render_bands(const std::filesystem::path& csv,
                                                       const std::filesystem::path& out_dir) {
  const auto t = read_csv(csv);
  std::vector<std::string> methods, bands;
  std::vector<int> ks;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (std::find(methods.begin(), methods.end(), t.at(i, "method")) == methods.end())
      methods.push_back(t.at(i, "method"));
    if (std::find(bands.begin(), bands.end(), t.at(i, "band_hz")) == bands.end()) bands.push_back(t.at(i, "band_hz"));
    const int k = std::stoi(t.at(i, "k"));
    if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
  }
  std::vector<std::filesystem::path> written;
  for (int k : ks)
    for (const auto& [col, label] : metric_columns()) {
      std::vector<Series> series;
      for (const auto& m : methods) {
        Series s{m, std::vector<double>(bands.size(), std::numeric_limits<double>::quiet_NaN())};
        for (std::size_t i = 0; i < t.rows.size(); ++i)
          if (t.at(i, "method") == m && std::stoi(t.at(i, "k")) == k) {
            const auto pos = std::find(bands.begin(), bands.end(), t.at(i, "band_hz")) - bands.begin();
            s.values[static_cast<std::size_t>(pos)] = t.number(i, col);
          }
        series.push_back(std::move(s));
      }
      std::vector<std::string> labels;
      for (const auto& b : bands) labels.push_back(b + " Hz");
      const auto path = out_dir / ("bands_" + col + "_k" + std::to_string(k) + ".svg");
      std::ofstream(path) << svg_bar_chart(label + " per octave band, K=" + std::to_string(k), label, labels, series);
      written.push_back(path);
    }
  return written;
}

}  // namespace eigenet::trainer

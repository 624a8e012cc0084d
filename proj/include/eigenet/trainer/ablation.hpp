#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "eigenet/trainer/report.hpp"

namespace eigenet::trainer {

struct AblationCell {
  std::string name;
  /// Which comparison tables the cell belongs to ("spectrum", "attention", "geometry").
  std::vector<std::string> tables;
  ModelConfig cfg;
};

inline std::string cell_name(const ModelConfig& c) {
  return json(c.attention).get<std::string>() + (c.use_modulation ? "_mod" : "_nomod") + "_" +
         json(c.spectrum_target).get<std::string>() + "_" + json(c.geometry_inputs).get<std::string>();
}

/// Spectrum targets under AA with modulation, plus attention kind × modulation
/// with the octave target. Shared cells are trained once. Geometry-input
/// variants are appended on request.
inline std::vector<AblationCell> ablation_cells(const ModelConfig& base, bool include_geometry = false) {
  std::vector<AblationCell> cells;
  auto add = [&](ModelConfig c, const std::string& table) {
    const auto name = cell_name(c);
    for (auto& cell : cells)
      if (cell.name == name) {
        cell.tables.push_back(table);
        return;
      }
    cells.push_back({name, {table}, c});
  };
  for (auto target : {model::SpectrumTarget::None, model::SpectrumTarget::FullStft, model::SpectrumTarget::Octave7}) {
    ModelConfig c = base;
    c.attention = model::AttentionKind::AA;
    c.use_modulation = true;
    c.geometry_inputs = model::GeometryInputs::Full;
    c.spectrum_target = target;
    add(c, "spectrum");
  }
  for (auto kind : {model::AttentionKind::AA, model::AttentionKind::SA, model::AttentionKind::CA})
    for (bool mod : {true, false}) {
      ModelConfig c = base;
      c.attention = kind;
      c.use_modulation = mod;
      c.geometry_inputs = model::GeometryInputs::Full;
      c.spectrum_target = model::SpectrumTarget::Octave7;
      add(c, "attention");
    }
  if (include_geometry)
    for (auto g : {model::GeometryInputs::DepthOnly, model::GeometryInputs::LocationOnly}) {
      ModelConfig c = base;
      c.attention = model::AttentionKind::AA;
      c.spectrum_target = model::SpectrumTarget::Octave7;
      c.geometry_inputs = g;
      add(c, "geometry");
    }
  return cells;
}

struct AblationResult {
  AblationCell cell;
  MetricsReport report;
};

/// Trains and evaluates every cell with the same data, training config and
/// evaluation protocol.
inline std::vector<AblationResult> run_ablation(const std::vector<AblationCell>& cells,
                                                const std::vector<data::Scene>& train_scenes,
                                                const std::vector<data::Scene>& test_scenes,
                                                const codec::FrozenCodec& codec, const TrainConfig& tc,
                                                const EvalConfig& ec,
                                                const std::function<void(const std::string&)>& progress = {}) {
  std::vector<AblationResult> out;
  for (const auto& cell : cells) {
    if (progress) progress("ablation cell " + cell.name);
    const auto train_caches = build_caches(train_scenes, codec, cell.cfg.spectrum_target);
    const auto test_caches = build_caches(test_scenes, codec, cell.cfg.spectrum_target);
    auto trained = train(cell.cfg, train_caches, codec, tc);
    out.push_back({cell, evaluate({model_method(cell.name, trained.model, codec)}, test_caches, ec)});
  }
  return out;
}

inline void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationResult>& results) {
  std::ofstream out(path);
  out << "cell,tables,attention,modulation,spectrum,geometry,k,edt_error_s,c50_error_db,t60_error_pct,count,"
         "excluded\n";
  for (const auto& r : results) {
    std::string tables;
    for (const auto& t : r.cell.tables) tables += (tables.empty() ? "" : "+") + t;
    const auto& c = r.cell.cfg;
    for (const auto& row : r.report.rows)
      out << r.cell.name << ',' << tables << ',' << json(c.attention).get<std::string>() << ','
          << (c.use_modulation ? "on" : "off") << ',' << json(c.spectrum_target).get<std::string>() << ','
          << json(c.geometry_inputs).get<std::string>() << ',' << row.k << ',' << fmt(row.mean.edt) << ','
          << fmt(row.mean.c50) << ',' << fmt(row.mean.t60) << ',' << row.count << ',' << row.excluded << '\n';
  }
}

/// Number of attention kinds for which modulation-on has lower mean C50
/// error (averaged over K) than modulation-off, read from a merged CSV.
inline int modulation_c50_wins(const CsvTable& t) {
  int wins = 0;
  for (const std::string kind : {"aa", "sa", "ca"}) {
    double on = 0, off = 0;
    int n_on = 0, n_off = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (t.at(i, "attention") != kind || t.at(i, "spectrum") != "octave" || t.at(i, "geometry") != "full") continue;
      if (t.at(i, "modulation") == "on") {
        on += t.number(i, "c50_error_db");
        ++n_on;
      } else {
        off += t.number(i, "c50_error_db");
        ++n_off;
      }
    }
    if (n_on > 0 && n_off > 0 && on / n_on < off / n_off) ++wins;
  }
  return wins;
}

}  // namespace eigenet::trainer

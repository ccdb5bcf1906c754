#include "treesumm/embed.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "treesumm/util.hpp"

namespace treesumm {

EmbedderConfig::Mode EmbedderConfig::mode_from_string(std::string_view s) {
  if (s == "hashed_bow" || s == "hashed") return Mode::kHashedBow;
  if (s == "external") return Mode::kExternal;
  throw Error("unknown embedder mode '" + std::string(s) + "'");
}

ExternalVectors ExternalVectors::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file '" + path + "'");
  ExternalVectors ev;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("embedding line " + std::to_string(line_no) + ": invalid JSON");
    try {
      std::string doc_id = j.at("doc_id").get<std::string>();
      UnitLevel level = unit_level_from_string(j.at("level").get<std::string>());
      const auto& rows = j.at("vectors");
      if (rows.empty())
        throw ParseError("embedding line " + std::to_string(line_no) + ": empty vectors");
      Matrix m(rows.size(), rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols)
          throw ParseError("embedding line " + std::to_string(line_no) + ": ragged vectors");
        for (std::size_t k = 0; k < m.cols; ++k) m(i, k) = rows[i][k].get<double>();
      }
      ev.table_[{std::move(doc_id), static_cast<int>(level)}] = std::move(m);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("embedding line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ev;
}

const Matrix& ExternalVectors::lookup(const std::string& doc_id, UnitLevel level) const {
  auto it = table_.find({doc_id, static_cast<int>(level)});
  if (it == table_.end())
    throw Error("no external vectors for document '" + doc_id + "' at level " + to_string(level));
  return it->second;
}

UnitEmbeddings embed_units(const Document& doc, UnitLevel level, const EmbedderConfig& cfg,
                           const ExternalVectors* ext) {
  if (cfg.dims == 0) throw Error("embedder dims must be positive");
  const std::size_t n = doc.unit_count(level);
  UnitEmbeddings out;
  out.level = level;

  if (cfg.mode == EmbedderConfig::Mode::kExternal) {
    if (ext == nullptr) throw Error("external embedder mode requires a loaded vector file");
    const Matrix& m = ext->lookup(doc.id, level);
    if (m.rows != n || m.cols != cfg.dims)
      throw Error("external vectors for '" + doc.id + "' have shape " + std::to_string(m.rows) +
                  "x" + std::to_string(m.cols) + ", expected " + std::to_string(n) + "x" +
                  std::to_string(cfg.dims));
    out.x = m;
    return out;
  }

  out.x = Matrix(n, cfg.dims);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.x.row(i);
    for (const std::string& tok : tokenize_lower(doc.unit_text(level, i)))
      row[fnv1a64(tok) % cfg.dims] += 1.0;
    double sq = 0.0;
    for (std::size_t k = 0; k < cfg.dims; ++k) sq += row[k] * row[k];
    if (sq > 0.0) {
      const double inv = 1.0 / std::sqrt(sq);
      for (std::size_t k = 0; k < cfg.dims; ++k) row[k] *= inv;
    }
  }
  return out;
}

}  // namespace treesumm

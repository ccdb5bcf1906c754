#pragma once

#include <map>
#include <string>

#include "treesumm/document.hpp"
#include "treesumm/matrix.hpp"

namespace treesumm {

struct EmbedderConfig {
  enum class Mode { kHashedBow, kExternal };
  Mode mode = Mode::kHashedBow;
  std::size_t dims = 768;
  std::string vectors_path;  // external mode only

  static const char* mode_name(Mode m) { return m == Mode::kHashedBow ? "hashed_bow" : "external"; }
  static Mode mode_from_string(std::string_view s);
};

/// Precomputed unit vectors keyed by (doc id, level), loaded from JSON Lines
/// of {"doc_id": ..., "level": "edu"|"sent", "vectors": [[...], ...]}.
class ExternalVectors {
 public:
  static ExternalVectors load(const std::string& path);

  /// Throws Error when the document/level pair is missing.
  const Matrix& lookup(const std::string& doc_id, UnitLevel level) const;

  bool empty() const { return table_.empty(); }

 private:
  std::map<std::pair<std::string, int>, Matrix> table_;
};

struct UnitEmbeddings {
  Matrix x;  // unit_count x dims
  UnitLevel level = UnitLevel::kEdu;
};

/// Hashed mode: each lowercased whitespace token is hashed to one of `dims`
/// buckets; counts are L2-normalized per unit (empty text stays the zero
/// vector). External mode: rows are taken verbatim from `ext`.
UnitEmbeddings embed_units(const Document& doc, UnitLevel level, const EmbedderConfig& cfg,
                           const ExternalVectors* ext = nullptr);

}  // namespace treesumm

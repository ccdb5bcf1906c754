#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "treesumm/matrix.hpp"
#include "treesumm/tree.hpp"

namespace treesumm {

enum class UnitLevel { kEdu, kSentence };

const char* to_string(UnitLevel level);
UnitLevel unit_level_from_string(std::string_view s);

struct Edu {
  std::size_t index = 0;
  std::string text;
  std::size_t sentence_index = 0;
};

/// Sentence i covers EDUs [edu_begin, edu_end).
struct Sentence {
  std::size_t index = 0;
  std::size_t edu_begin = 0;
  std::size_t edu_end = 0;
};

struct Document {
  std::string id;
  std::vector<Edu> edus;
  std::vector<Sentence> sentences;
  ConstituencyTree tree;
  std::vector<std::string> reference;
  std::optional<std::vector<int>> labels;

  std::size_t edu_count() const { return edus.size(); }
  std::size_t sentence_count() const { return sentences.size(); }
  std::size_t unit_count(UnitLevel level) const {
    return level == UnitLevel::kEdu ? edu_count() : sentence_count();
  }

  /// EDU texts of a sentence joined with single spaces.
  std::string sentence_text(std::size_t s) const;
  std::string unit_text(UnitLevel level, std::size_t i) const;

  /// sentence_index per EDU as a flat vector.
  std::vector<std::size_t> sentence_of_edu() const;
};

/// NS x NE indicator: indicator(i, j) = 1 iff EDU j belongs to sentence i.
struct SentenceMap {
  std::size_t ns = 0;
  std::size_t ne = 0;
  Matrix indicator;
};

/// Checks every Document invariant (EDU contiguity, sentence partition,
/// tree leaf count, label values); throws ValidationError naming the
/// offending unit.
void validate_document(const Document& doc);

SentenceMap sentence_map(const Document& doc);

struct CorpusOptions {
  std::size_t l_max = 512;    // documents with more EDUs are rejected
  std::size_t max_docs = 0;   // 0 = no cap
};

/// JSON Lines, one document per line:
///   {"id": ..., "edus": [{"text": ..., "sent": ...}, ...],
///    "tree": "<bracket string>", "ref": [...], "labels": [0/1, ...]?}
std::vector<Document> load_corpus_jsonl(const std::string& path, const CorpusOptions& opts = {});
std::vector<Document> load_corpus_jsonl(std::istream& in, const CorpusOptions& opts = {});

void write_corpus_jsonl(std::ostream& out, const std::vector<Document>& docs);
void write_corpus_jsonl(const std::string& path, const std::vector<Document>& docs);

std::string document_to_json_line(const Document& doc);

}  // namespace treesumm

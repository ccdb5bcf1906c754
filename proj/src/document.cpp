#include "treesumm/document.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace treesumm {

const char* to_string(UnitLevel level) { return level == UnitLevel::kEdu ? "edu" : "sent"; }

UnitLevel unit_level_from_string(std::string_view s) {
  if (s == "edu") return UnitLevel::kEdu;
  if (s == "sent" || s == "sentence") return UnitLevel::kSentence;
  throw Error("unknown unit level '" + std::string(s) + "' (expected edu|sent)");
}

std::string Document::sentence_text(std::size_t s) const {
  const Sentence& sent = sentences[s];
  std::string out;
  for (std::size_t e = sent.edu_begin; e < sent.edu_end; ++e) {
    if (!out.empty()) out += ' ';
    out += edus[e].text;
  }
  return out;
}

std::string Document::unit_text(UnitLevel level, std::size_t i) const {
  return level == UnitLevel::kEdu ? edus[i].text : sentence_text(i);
}

std::vector<std::size_t> Document::sentence_of_edu() const {
  std::vector<std::size_t> out(edus.size());
  for (std::size_t i = 0; i < edus.size(); ++i) out[i] = edus[i].sentence_index;
  return out;
}

void validate_document(const Document& doc) {
  const std::size_t ne = doc.edu_count();
  if (ne == 0) throw ValidationError("document '" + doc.id + "': no EDUs");
  for (std::size_t i = 0; i < ne; ++i) {
    if (doc.edus[i].index != i)
      throw ValidationError("document '" + doc.id + "': EDU " + std::to_string(i) +
                            " has index " + std::to_string(doc.edus[i].index));
  }
  // Sentence ranges must partition 0..NE-1 in order, non-empty.
  std::size_t expect_begin = 0;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const Sentence& sent = doc.sentences[s];
    if (sent.index != s)
      throw ValidationError("document '" + doc.id + "': sentence " + std::to_string(s) +
                            " has index " + std::to_string(sent.index));
    if (sent.edu_begin != expect_begin || sent.edu_end <= sent.edu_begin)
      throw ValidationError("document '" + doc.id + "': sentence " + std::to_string(s) +
                            " range [" + std::to_string(sent.edu_begin) + "," +
                            std::to_string(sent.edu_end) + ") does not continue the partition at " +
                            std::to_string(expect_begin));
    expect_begin = sent.edu_end;
  }
  if (expect_begin != ne)
    throw ValidationError("document '" + doc.id + "': sentences cover " +
                          std::to_string(expect_begin) + " EDUs, document has " + std::to_string(ne));
  for (std::size_t i = 0; i < ne; ++i) {
    const std::size_t s = doc.edus[i].sentence_index;
    if (s >= doc.sentences.size() || i < doc.sentences[s].edu_begin || i >= doc.sentences[s].edu_end)
      throw ValidationError("document '" + doc.id + "': EDU " + std::to_string(i) +
                            " sentence_index " + std::to_string(s) + " disagrees with ranges");
    if (i > 0 && doc.edus[i].sentence_index < doc.edus[i - 1].sentence_index)
      throw ValidationError("document '" + doc.id + "': sentence_index decreases at EDU " +
                            std::to_string(i));
  }
  if (doc.tree.leaf_count() != ne)
    throw ValidationError("document '" + doc.id + "': tree has " +
                          std::to_string(doc.tree.leaf_count()) + " leaves but " +
                          std::to_string(ne) + " EDUs");
  if (doc.labels) {
    const std::size_t n = doc.labels->size();
    if (n != ne && n != doc.sentence_count())
      throw ValidationError("document '" + doc.id + "': labels length " + std::to_string(n) +
                            " matches neither EDU count " + std::to_string(ne) +
                            " nor sentence count " + std::to_string(doc.sentence_count()));
    for (std::size_t i = 0; i < n; ++i) {
      int v = (*doc.labels)[i];
      if (v != 0 && v != 1)
        throw ValidationError("document '" + doc.id + "': label at unit " + std::to_string(i) +
                              " is " + std::to_string(v) + ", expected 0 or 1");
    }
  }
}

SentenceMap sentence_map(const Document& doc) {
  SentenceMap m;
  m.ns = doc.sentence_count();
  m.ne = doc.edu_count();
  m.indicator = Matrix(m.ns, m.ne);
  for (const Sentence& s : doc.sentences) {
    for (std::size_t e = s.edu_begin; e < s.edu_end; ++e) m.indicator(s.index, e) = 1.0;
  }
  return m;
}

namespace {

Document document_from_json(const nlohmann::json& j, std::size_t line_no) {
  auto where = [&] { return "corpus line " + std::to_string(line_no); };
  if (!j.is_object()) throw ParseError(where() + ": expected a JSON object");
  Document doc;
  try {
    doc.id = j.at("id").get<std::string>();
    std::size_t cur_sent = 0;
    std::size_t idx = 0;
    for (const auto& je : j.at("edus")) {
      Edu e;
      e.index = idx++;
      e.text = je.at("text").get<std::string>();
      e.sentence_index = je.at("sent").get<std::size_t>();
      if (e.sentence_index != cur_sent && e.sentence_index != cur_sent + 1)
        throw ParseError(where() + ": EDU " + std::to_string(e.index) + " has sent " +
                         std::to_string(e.sentence_index) + " after sent " + std::to_string(cur_sent));
      if (doc.edus.empty() && e.sentence_index != 0)
        throw ParseError(where() + ": first EDU must be in sentence 0");
      if (e.sentence_index == cur_sent + 1 || doc.edus.empty()) {
        if (!doc.edus.empty()) doc.sentences.back().edu_end = e.index;
        doc.sentences.push_back(Sentence{e.sentence_index, e.index, e.index + 1});
        cur_sent = e.sentence_index;
      }
      doc.edus.push_back(std::move(e));
    }
    if (!doc.sentences.empty()) doc.sentences.back().edu_end = doc.edus.size();
    doc.tree = ConstituencyTree::parse(j.at("tree").get<std::string>());
    for (const auto& r : j.at("ref")) doc.reference.push_back(r.get<std::string>());
    if (j.contains("labels")) doc.labels = j.at("labels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where() + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(where() + ": " + e.what());
  }
  try {
    validate_document(doc);
  } catch (const ValidationError& e) {
    throw ValidationError(where() + ": " + e.what());
  }
  return doc;
}

}  // namespace

std::vector<Document> load_corpus_jsonl(std::istream& in, const CorpusOptions& opts) {
  std::vector<Document> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (opts.max_docs > 0 && docs.size() >= opts.max_docs) break;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw ParseError("corpus line " + std::to_string(line_no) + ": invalid JSON");
    Document doc = document_from_json(j, line_no);
    if (doc.edu_count() > opts.l_max)
      throw ValidationError("corpus line " + std::to_string(line_no) + ": document '" + doc.id +
                            "' has " + std::to_string(doc.edu_count()) + " EDUs, exceeding l_max=" +
                            std::to_string(opts.l_max) + " (documents are rejected, not truncated)");
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> load_corpus_jsonl(const std::string& path, const CorpusOptions& opts) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path + "'");
  return load_corpus_jsonl(in, opts);
}

std::string document_to_json_line(const Document& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  nlohmann::json edus = nlohmann::json::array();
  for (const Edu& e : doc.edus) edus.push_back({{"text", e.text}, {"sent", e.sentence_index}});
  j["edus"] = std::move(edus);
  j["tree"] = doc.tree.serialize();
  j["ref"] = doc.reference;
  if (doc.labels) j["labels"] = *doc.labels;
  return j.dump();
}

void write_corpus_jsonl(std::ostream& out, const std::vector<Document>& docs) {
  for (const Document& d : docs) out << document_to_json_line(d) << '\n';
}

void write_corpus_jsonl(const std::string& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_corpus_jsonl(out, docs);
}

}  // namespace treesumm

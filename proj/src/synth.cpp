#include "treesumm/synth.hpp"

#include <algorithm>
#include <array>

#include "treesumm/summarize.hpp"
#include "treesumm/util.hpp"

namespace treesumm {

namespace {

constexpr std::size_t kTopics = 6;

const std::array<const char*, kTopics> kTopicWords = {"finance", "weather",  "sports",
                                                      "science", "travel",   "culture"};

const std::array<std::array<const char*, 4>, kTopics> kSignatures = {{
    {"market", "shares", "profit", "budget"},
    {"storm", "rainfall", "forecast", "humidity"},
    {"league", "striker", "stadium", "referee"},
    {"theorem", "particle", "neuron", "catalyst"},
    {"harbor", "voyage", "luggage", "transit"},
    {"gallery", "ballad", "festival", "sculpture"},
}};

const std::array<const char*, 40> kFillers = {
    "the",     "a",       "and",     "of",      "to",      "in",     "on",      "with",
    "for",     "by",      "it",      "was",     "were",    "has",    "had",     "said",
    "also",    "still",   "quite",   "rather",  "again",   "later",  "early",   "often",
    "around",  "between", "under",   "over",    "about",   "while",  "though",  "during",
    "before",  "after",   "because", "perhaps", "nearly",  "mostly", "various", "several"};

/// Fraction of Nucleus edges on the leaf's path to the root.
double nucleus_fraction(const ConstituencyTree& tree, std::size_t edu) {
  int v = tree.leaf_of(edu);
  std::size_t nuclei = 0, edges = 0;
  while (tree.node(v).parent >= 0) {
    const TreeNode& p = tree.node(tree.node(v).parent);
    const Nuclearity nuc = p.left == v ? p.left_nuc : p.right_nuc;
    if (nuc == Nuclearity::kNucleus) ++nuclei;
    ++edges;
    v = tree.node(v).parent;
  }
  return edges == 0 ? 1.0 : static_cast<double>(nuclei) / static_cast<double>(edges);
}

std::string filler_word(Rng& rng) { return kFillers[rng.below(kFillers.size())]; }

}  // namespace

std::vector<Document> make_synthetic_corpus(const SynthConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<Document> docs;
  docs.reserve(cfg.num_docs);

  for (std::size_t d = 0; d < cfg.num_docs; ++d) {
    const std::size_t topic = rng.below(kTopics);
    const std::size_t other_topic = (topic + 1 + rng.below(kTopics - 1)) % kTopics;
    const std::size_t ne = 5 + rng.below(8);  // 5..12 EDUs

    Document doc;
    doc.id = "synth-" + std::to_string(d);
    doc.tree = random_tree(rng, ne);

    // Two most nucleus-weighted EDUs carry the document signature.
    std::vector<std::size_t> by_score(ne);
    for (std::size_t i = 0; i < ne; ++i) by_score[i] = i;
    std::vector<double> score(ne);
    for (std::size_t i = 0; i < ne; ++i) score[i] = nucleus_fraction(doc.tree, i);
    std::stable_sort(by_score.begin(), by_score.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    const std::size_t key0 = std::min(by_score[0], by_score[1]);
    const std::size_t key1 = std::max(by_score[0], by_score[1]);

    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < ne; ++i)
      if (i != key0 && i != key1) rest.push_back(i);
    rng.shuffle(rest);
    const std::size_t neg0 = rest[0];
    const std::size_t neg1 = rest[1];

    std::vector<std::string> texts(ne);
    const auto& sig = kSignatures[topic];
    const auto& wrong = kSignatures[other_topic];
    texts[key0] = std::string(sig[0]) + " " + sig[1] + " " + filler_word(rng);
    texts[key1] = std::string(sig[2]) + " " + sig[3] + " " + filler_word(rng);
    texts[neg0] = std::string(wrong[0]) + " " + wrong[1] + " " + filler_word(rng);
    texts[neg1] = std::string(wrong[2]) + " " + wrong[3] + " " + filler_word(rng);
    bool anchored = false;
    for (std::size_t i = 0; i < ne; ++i) {
      if (!texts[i].empty()) continue;
      std::string t = filler_word(rng);
      t += ' ';
      t += filler_word(rng);
      t += ' ';
      t += filler_word(rng);
      // The document topic is broadcast through the plain EDUs; the first
      // one always carries it so every document states its topic somewhere.
      if (!anchored || rng.uniform() < 0.6) {
        t += ' ';
        t += kTopicWords[topic];
        anchored = true;
      }
      texts[i] = std::move(t);
    }

    // Sentences: contiguous blocks of 1..3 EDUs.
    std::size_t begin = 0, sent = 0;
    while (begin < ne) {
      const std::size_t len = std::min<std::size_t>(1 + rng.below(3), ne - begin);
      doc.sentences.push_back(Sentence{sent, begin, begin + len});
      for (std::size_t i = begin; i < begin + len; ++i)
        doc.edus.push_back(Edu{i, texts[i], sent});
      begin += len;
      ++sent;
    }

    doc.reference = {std::string(sig[0]) + " " + sig[1], std::string(sig[2]) + " " + sig[3]};
    doc.labels = oracle_labels(doc, UnitLevel::kEdu, default_unit_cap(UnitLevel::kEdu));
    validate_document(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace treesumm

#pragma once

#include <cstdint>
#include <vector>

#include "treesumm/document.hpp"

namespace treesumm {

struct SynthConfig {
  std::size_t num_docs = 200;
  std::uint64_t seed = 7;
};

/// Seed-deterministic corpus whose oracle labels line up with tree
/// nuclearity. Each document picks a topic; the two most nucleus-weighted
/// EDUs carry the topic's signature words (which also form the reference),
/// two distractor EDUs carry another topic's signature, and the remaining
/// EDUs broadcast the document topic among filler words. A unit's own text
/// never reveals whether its signature matches the document topic, so
/// models that can read the tree neighbourhood have an advantage.
std::vector<Document> make_synthetic_corpus(const SynthConfig& cfg);

}  // namespace treesumm

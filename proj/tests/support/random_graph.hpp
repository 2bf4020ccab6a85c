#pragma once

#include <random>
#include <string>

#include "kgqa/kgstore.hpp"
#include "kgqa/rng.hpp"

namespace kgqa::testing {

// Entities e0..e{n-1} named from a small word pool so names overlap a lot.
inline kg::KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples,
                                       std::uint64_t seed) {
    static const char* pool[] = {"john", "smith", "anna", "river", "stone", "mary", "blue", "north", "hill", "lee"};
    auto rng = make_stream(seed, "graph");
    kg::KnowledgeGraph g;
    for (std::size_t t = 0; t < triples; ++t) {
        const auto s = uniform_index(rng, entities);
        const auto r = uniform_index(rng, relations);
        const auto o = uniform_index(rng, entities);
        g.add({"e" + std::to_string(s), "r" + std::to_string(r), "e" + std::to_string(o)});
    }
    for (std::size_t e = 0; e < entities; ++e) {
        const std::string id = "e" + std::to_string(e);
        const auto names = 1 + uniform_index(rng, 2);
        for (std::size_t k = 0; k < names; ++k) {
            std::string name = pool[uniform_index(rng, 10)];
            name += std::string(" ") + pool[uniform_index(rng, 10)];
            if (uniform01(rng) < 0.3) name += std::string(" ") + pool[uniform_index(rng, 10)];
            g.add_name(id, name);
        }
    }
    return g;
}

}  // namespace kgqa::testing

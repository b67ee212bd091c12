// Generates the synthetic short-vs-long rollout corpus and writes it as
// rollouts.jsonl, ready for `lcpolab pairs`. The corpus pairs a direct
// low-token response family against a looping high-token one per prompt
// class, so downstream training has a real length signal to exploit.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "lcpo/toylab.hpp"

int main(int argc, char** argv) {
    if (argc < 2 || argc > 5) {
        std::fprintf(stderr,
                     "usage: make_corpus <out.jsonl> [classes=200] [seed=41] "
                     "[samples_per_class=16]\n");
        return 1;
    }
    const std::string out_path = argv[1];
    const int classes = argc > 2 ? std::atoi(argv[2]) : 200;
    const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 41;
    const int samples = argc > 4 ? std::atoi(argv[4]) : 16;

    const auto corpus = lcpo::toylab::make_synthetic_corpus(classes, 8, 40, seed, samples);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
        return 1;
    }
    lcpo::datapipe::write_rollouts_jsonl(out, corpus.records);
    std::cout << "wrote " << corpus.records.size() << " rollout records to " << out_path
              << " (answers are tokens 1..4, end token 0)\n";
    return 0;
}

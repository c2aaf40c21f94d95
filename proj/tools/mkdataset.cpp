// Generates the deterministic proxy benchmark datasets (procedural truth
// images). Kept separate from the main CLI: it produces inputs for the
// benchmark, it is not part of the processing pipeline.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#include "burstfuse/bench.hpp"
#include "burstfuse/errors.hpp"

int main(int argc, char** argv) {
    std::string dir;
    int count = 8;
    int size = 512;
    uint64_t seed = 1234;

    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        auto next = [&]() -> const char* {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "burstfuse-mkdataset: %s needs a value\n", arg.c_str());
                std::exit(1);
            }
            return argv[++i];
        };
        if (arg == "--output-dir") {
            dir = next();
        } else if (arg == "--count") {
            count = std::atoi(next());
        } else if (arg == "--size") {
            size = std::atoi(next());
        } else if (arg == "--seed") {
            seed = std::strtoull(next(), nullptr, 10);
        } else if (arg == "--help" || arg == "-h") {
            std::printf(
                "usage: burstfuse-mkdataset --output-dir DIR [--count N] [--size PX] [--seed S]\n");
            return 0;
        } else {
            std::fprintf(stderr, "burstfuse-mkdataset: unknown argument '%s'\n", arg.c_str());
            return 1;
        }
    }
    if (dir.empty() || count < 1 || size < 16) {
        std::fprintf(stderr,
                     "burstfuse-mkdataset: need --output-dir, positive --count, --size >= 16\n");
        return 1;
    }

    try {
        burstfuse::write_proxy_dataset(dir, count, size, seed);
    } catch (const burstfuse::Error& e) {
        std::fprintf(stderr, "burstfuse-mkdataset: %s\n", e.what());
        return static_cast<int>(e.code());
    }
    std::printf("wrote %d images (%dx%d) to %s\n", count, size, size, dir.c_str());
    return 0;
}

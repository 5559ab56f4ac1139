// Generates a synthetic demo corpus so the ia subcommands can be exercised
// without real data.
#include <cstdio>

#include "CLI11.hpp"

#include "ia/fixtures.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic HOI fixture generator"};
    std::string out_dir;
    int samples = 24;
    int categories = 6;
    std::uint64_t seed = 0;
    int image_size = 64;
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--samples", samples, "number of samples");
    app.add_option("--categories", categories, "number of interaction categories");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--image-size", image_size, "square image size in pixels");
    CLI11_PARSE(app, argc, argv);
    try {
        ia::FixtureOptions opts;
        opts.image_size = image_size;
        auto corpus = ia::make_fixture_corpus(samples, categories, seed, opts);
        const std::string manifest = ia::write_fixture_corpus(out_dir, corpus);
        std::printf("wrote %d samples to %s\n", samples, manifest.c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

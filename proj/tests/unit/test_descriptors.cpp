#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numeric>
#include <vector>

#include "support/oracles.hpp"
#include "veinpad/descriptors.hpp"
#include "veinpad/errors.hpp"
#include "veinpad/rng.hpp"

using namespace veinpad;
using veinpad::testing::random_image;

namespace {

GrayImage shifted(const GrayImage& img, double delta) {
    std::vector<double> px = img.pixels();
    for (auto& v : px) v += delta;
    return GrayImage(img.width(), img.height(), std::move(px));
}

GrayImage halved(const GrayImage& img) {
    std::vector<double> px = img.pixels();
    for (auto& v : px) v *= 0.5;
    return GrayImage(img.width(), img.height(), std::move(px));
}

// Random zero-mean bank, valid by construction.
FilterBank make_test_bank(int k, int s, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> filters(static_cast<std::size_t>(k),
                                             std::vector<double>(static_cast<std::size_t>(s) * s));
    for (auto& f : filters) {
        double mean = 0.0;
        for (auto& w : f) {
            w = rng.gaussian();
            mean += w;
        }
        mean /= static_cast<double>(f.size());
        for (auto& w : f) w -= mean;
    }
    return FilterBank(k, s, std::move(filters));
}

std::uint64_t count_sum(const std::vector<std::uint64_t>& counts) {
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    return total;
}

} // namespace

// ------------------------------------------------------------------- LBP ---

TEST_CASE("lbp histogram shape and normalization") {
    const GrayImage img = random_image(20, 14, 42);
    const FeatureVector fv = lbp_histogram(img);
    CHECK(fv.bins.size() == 59);
    CHECK(fv.descriptor_kind == DescriptorKind::LBP);
    const double sum = std::accumulate(fv.bins.begin(), fv.bins.end(), 0.0);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
    CHECK(count_sum(lbp_counts(img)) == 18u * 12u);
}

TEST_CASE("lbp constant image lands in the all-ones uniform bin") {
    const GrayImage img(9, 9, std::vector<double>(81, 0.3));
    const auto counts = lbp_counts(img);
    // Code 255 is uniform; 57 uniform codes precede it in ascending order.
    CHECK(counts[57] == 49u);
    CHECK(count_sum(counts) == 49u);
}

TEST_CASE("lbp forced all-below neighborhood gives code zero") {
    // Corner case: lone bright center, exactly one interior pixel.
    std::vector<double> px(9, 0.0);
    px[4] = 0.5;
    const auto counts = lbp_counts(GrayImage(3, 3, px));
    CHECK(counts[0] == 1u);
    CHECK(count_sum(counts) == 1u);
}

TEST_CASE("lbp gray-shift and positive-rescale invariance") {
    const GrayImage img = random_image(24, 18, 7);
    const GrayImage img_scaled = halved(img);
    const GrayImage img_shifted = shifted(halved(img), 0.05);
    CHECK(lbp_counts(img) == lbp_counts(img_scaled));
    CHECK(lbp_counts(img) == lbp_counts(img_shifted));
}

TEST_CASE("lbp equals the naive reference bitwise") {
    for (int t = 0; t < 20; ++t) {
        const GrayImage img = random_image(16, 16, 1000 + static_cast<std::uint64_t>(t));
        CHECK(lbp_counts(img) == veinpad::testing::ref_lbp_counts(img));
    }
    // non-square, larger
    const GrayImage wide = random_image(37, 11, 2000);
    CHECK(lbp_counts(wide) == veinpad::testing::ref_lbp_counts(wide));
}

TEST_CASE("lbp rejects undersized images") {
    CHECK_THROWS_AS(lbp_counts(GrayImage(2, 5, std::vector<double>(10, 0.5))), DimensionError);
}

// ------------------------------------------------------------------- LPQ ---

TEST_CASE("lpq histogram shape and normalization") {
    const GrayImage img = random_image(19, 13, 43);
    const FeatureVector fv = lpq_histogram(img);
    CHECK(fv.bins.size() == 256);
    const double sum = std::accumulate(fv.bins.begin(), fv.bins.end(), 0.0);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
    CHECK(count_sum(lpq_counts(img)) == 13u * 7u);
}

TEST_CASE("lpq constant image maps to code zero") {
    const GrayImage img(10, 9, std::vector<double>(90, 0.77));
    const auto counts = lpq_counts(img);
    CHECK(counts[0] == 4u * 3u);
    CHECK(count_sum(counts) == 12u);
}

TEST_CASE("lpq gray-shift and halving invariance") {
    const GrayImage img = random_image(21, 16, 8);
    CHECK(lpq_counts(img) == lpq_counts(shifted(halved(img), 0.05)));
    CHECK(lpq_counts(img) == lpq_counts(halved(img)));
}

TEST_CASE("lpq decorrelation matrix is orthonormal and diagonalizes the model") {
    const auto v = lpq_decorrelation();
    // Columns orthonormal.
    for (int c1 = 0; c1 < 8; ++c1) {
        for (int c2 = 0; c2 < 8; ++c2) {
            double dot = 0.0;
            for (int r = 0; r < 8; ++r) {
                dot += v[static_cast<std::size_t>(r) * 8 + c1] *
                       v[static_cast<std::size_t>(r) * 8 + c2];
            }
            CHECK(std::fabs(dot - (c1 == c2 ? 1.0 : 0.0)) <= 1e-9);
        }
    }
    // V^T D V diagonal with descending diagonal, for D built from scratch.
    const auto d = veinpad::testing::ref_lpq_covariance();
    double diag[8];
    double scale = 0.0;
    for (int i = 0; i < 64; ++i) scale = std::max(scale, std::fabs(d[static_cast<std::size_t>(i)]));
    for (int c1 = 0; c1 < 8; ++c1) {
        for (int c2 = 0; c2 < 8; ++c2) {
            double acc = 0.0;
            for (int r = 0; r < 8; ++r) {
                double dv = 0.0;
                for (int s = 0; s < 8; ++s) {
                    dv += d[static_cast<std::size_t>(r) * 8 + s] *
                          v[static_cast<std::size_t>(s) * 8 + c2];
                }
                acc += v[static_cast<std::size_t>(r) * 8 + c1] * dv;
            }
            if (c1 == c2) {
                diag[c1] = acc;
            } else {
                CHECK(std::fabs(acc) <= 1e-9 * scale);
            }
        }
    }
    for (int c = 1; c < 8; ++c) CHECK(diag[c] <= diag[c - 1] + 1e-9 * scale);
    // Sign convention: the largest-magnitude entry of each column is positive.
    for (int c = 0; c < 8; ++c) {
        int arg = 0;
        for (int r = 1; r < 8; ++r) {
            if (std::fabs(v[static_cast<std::size_t>(r) * 8 + c]) >
                std::fabs(v[static_cast<std::size_t>(arg) * 8 + c])) {
                arg = r;
            }
        }
        CHECK(v[static_cast<std::size_t>(arg) * 8 + c] > 0.0);
    }
}

TEST_CASE("lpq equals the naive reference bitwise") {
    for (int t = 0; t < 20; ++t) {
        const GrayImage img = random_image(16, 16, 3000 + static_cast<std::uint64_t>(t));
        CHECK(lpq_counts(img) == veinpad::testing::ref_lpq_counts(img));
    }
    const GrayImage tall = random_image(9, 33, 4000);
    CHECK(lpq_counts(tall) == veinpad::testing::ref_lpq_counts(tall));
}

TEST_CASE("lpq rejects undersized images") {
    CHECK_THROWS_AS(lpq_counts(GrayImage(6, 7, std::vector<double>(42, 0.5))), DimensionError);
}

// ------------------------------------------------------------------ BSIF ---

TEST_CASE("bsif histogram shape, constant-image bin, invariances") {
    const FilterBank bank = make_test_bank(6, 5, 90);
    const GrayImage img = random_image(18, 15, 44);
    const FeatureVector fv = bsif_histogram(img, bank);
    CHECK(fv.bins.size() == 64);
    const double sum = std::accumulate(fv.bins.begin(), fv.bins.end(), 0.0);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);
    CHECK(count_sum(bsif_counts(img, bank)) == 14u * 11u);

    const GrayImage flat(11, 11, std::vector<double>(121, 0.42));
    const auto counts = bsif_counts(flat, bank);
    CHECK(counts[0] == 7u * 7u);

    CHECK(bsif_counts(img, bank) == bsif_counts(halved(img), bank));
    CHECK(bsif_counts(img, bank) == bsif_counts(shifted(halved(img), 0.05), bank));
}

TEST_CASE("bsif equals the naive reference bitwise") {
    const FilterBank bank5 = make_test_bank(5, 5, 91);
    for (int t = 0; t < 20; ++t) {
        const GrayImage img = random_image(16, 16, 5000 + static_cast<std::uint64_t>(t));
        CHECK(bsif_counts(img, bank5) == veinpad::testing::ref_bsif_counts(img, bank5));
    }
    const FilterBank bank3 = make_test_bank(8, 3, 92);
    const GrayImage img = random_image(25, 13, 6000);
    CHECK(bsif_counts(img, bank3) == veinpad::testing::ref_bsif_counts(img, bank3));
}

TEST_CASE("bsif rejects images smaller than the filter") {
    const FilterBank bank = make_test_bank(4, 7, 93);
    CHECK_THROWS_AS(bsif_counts(GrayImage(6, 9, std::vector<double>(54, 0.5)), bank),
                    DimensionError);
}

TEST_CASE("FilterBank validates shape, zero mean, and independence") {
    CHECK_THROWS_AS(FilterBank(0, 5, {}), ContractError);
    CHECK_THROWS_AS(FilterBank(1, 4, {std::vector<double>(16, 0.0)}), ContractError);
    CHECK_THROWS_AS(FilterBank(2, 3, {std::vector<double>(9, 0.0)}), DimensionError);

    std::vector<double> not_zero_mean(9, 0.1);
    CHECK_THROWS_AS(FilterBank(1, 3, {not_zero_mean}), ContractError);

    std::vector<double> f1 = {1, -1, 0, 0, 0, 0, 0, 0, 0};
    std::vector<double> f2 = f1;
    for (auto& v : f2) v *= 2.0; // dependent
    CHECK_THROWS_AS(FilterBank(2, 3, {f1, f2}), ContractError);

    std::vector<double> f3 = {0, 0, 1, -1, 0, 0, 0, 0, 0};
    CHECK_NOTHROW(FilterBank(2, 3, {f1, f3}));
}

TEST_CASE("filter bank file round-trips bitwise") {
    const FilterBank bank = make_test_bank(3, 5, 94);
    veinpad::testing::TempDir tmp("veinpad_bank");
    const auto path = tmp.path() / "bank.txt";
    save_filter_bank(bank, path);
    const FilterBank back = load_filter_bank(path);
    CHECK(back.k() == bank.k());
    CHECK(back.s() == bank.s());
    for (int i = 0; i < bank.k(); ++i) CHECK(back.filter(i) == bank.filter(i));

    CHECK_THROWS_AS(load_filter_bank(tmp.path() / "missing.txt"), IoError);
    {
        std::FILE* f = std::fopen((tmp.path() / "corrupt.txt").string().c_str(), "w");
        std::fputs("BSIF 2 3\n0.5 0.5\n", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_filter_bank(tmp.path() / "corrupt.txt"), ParseError);
}

TEST_CASE("learn_bsif_filters is deterministic and recovers planted gratings") {
    const int s = 7, d = s * s;
    Rng rng(55);
    // Two orthogonal full-period gratings as independent sources.
    std::vector<double> gx(static_cast<std::size_t>(d)), gy(static_cast<std::size_t>(d));
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            gx[static_cast<std::size_t>(y) * s + x] = std::sin(2.0 * 3.14159265358979 * x / s);
            gy[static_cast<std::size_t>(y) * s + x] = std::sin(2.0 * 3.14159265358979 * y / s);
        }
    }
    std::vector<std::vector<double>> patches(6000, std::vector<double>(static_cast<std::size_t>(d)));
    for (auto& p : patches) {
        const double a = rng.uniform(-1.0, 1.0);
        const double b = rng.uniform(-1.0, 1.0);
        for (int i = 0; i < d; ++i) {
            p[static_cast<std::size_t>(i)] = a * gx[static_cast<std::size_t>(i)] +
                                             b * gy[static_cast<std::size_t>(i)] +
                                             0.01 * rng.gaussian();
        }
    }

    const FilterBank bank = learn_bsif_filters(patches, 2, s, 17);
    const FilterBank bank2 = learn_bsif_filters(patches, 2, s, 17);
    for (int i = 0; i < 2; ++i) CHECK(bank.filter(i) == bank2.filter(i));

    auto ncorr = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return std::fabs(dot) / std::sqrt(na * nb);
    };
    for (const auto* g : {&gx, &gy}) {
        double best = 0.0;
        for (int i = 0; i < 2; ++i) best = std::max(best, ncorr(*g, bank.filter(i)));
        CHECK(best >= 0.95);
    }

    // Filters are zero-mean by the learning pipeline's centering.
    for (int i = 0; i < 2; ++i) {
        double sum = 0.0;
        for (double v : bank.filter(i)) sum += v;
        CHECK(std::fabs(sum) <= 1e-6);
    }
}

TEST_CASE("learn_bsif_filters enforces patch count and k bounds") {
    std::vector<std::vector<double>> few(100, std::vector<double>(9, 0.0));
    CHECK_THROWS_AS(learn_bsif_filters(few, 2, 3, 1), TrainingError);
    std::vector<std::vector<double>> many(5000, std::vector<double>(9, 0.0));
    CHECK_THROWS_AS(learn_bsif_filters(many, 9, 3, 1), ContractError);
}

// -------------------------------------------------------------- dispatch ---

TEST_CASE("extract dispatch identities") {
    const GrayImage img = random_image(16, 16, 70);
    const FeatureVector direct = lbp_histogram(img);
    const FeatureVector via = extract(img, DescriptorKind::LBP);
    CHECK(via.bins == direct.bins);
    CHECK(via.source_kind == SourceKind::Raw);

    const ScalarMap diffuse(16, 16, img.pixels());
    const FeatureVector dv = extract(diffuse, DescriptorKind::LPQ);
    CHECK(dv.bins == lpq_histogram(img).bins);
    CHECK(dv.source_kind == SourceKind::DiffuseMap);

    CHECK_THROWS_AS(extract(img, DescriptorKind::BSIF), ContractError);

    const ScalarMap too_bright(16, 16, std::vector<double>(256, 1.5));
    CHECK_THROWS_AS(extract(too_bright, DescriptorKind::LBP), ContractError);
}

TEST_CASE("normal map features are concatenated channel histograms") {
    Rng rng(71);
    std::vector<std::array<double, 3>> raw(16 * 16);
    for (auto& n : raw) {
        n = {0.5 * (2.0 * rng.uniform01() - 1.0), 0.5 * (2.0 * rng.uniform01() - 1.0), 1.0};
    }
    const NormalMap normals = normalize_normals(16, 16, raw);

    const FeatureVector fv = extract(normals, DescriptorKind::LBP);
    CHECK(fv.bins.size() == 3u * 59u);
    CHECK(fv.source_kind == SourceKind::NormalMap);
    const double sum = std::accumulate(fv.bins.begin(), fv.bins.end(), 0.0);
    CHECK(std::fabs(sum - 1.0) <= 1e-9);

    const auto channels = normal_channels(normals);
    REQUIRE(channels.size() == 3);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                const double v = normals.at(y, x)[static_cast<std::size_t>(c)];
                CHECK(channels[static_cast<std::size_t>(c)].at(y, x) ==
                      doctest::Approx((v + 1.0) / 2.0).epsilon(1e-12));
            }
        }
    }
    // Manual concatenation of per-channel histograms, renormalized.
    std::vector<double> manual;
    for (const auto& ch : channels) {
        const auto h = lbp_histogram(ch);
        manual.insert(manual.end(), h.bins.begin(), h.bins.end());
    }
    for (auto& v : manual) v /= 3.0;
    REQUIRE(manual.size() == fv.bins.size());
    for (std::size_t i = 0; i < manual.size(); ++i) {
        CHECK(fv.bins[i] == doctest::Approx(manual[i]).epsilon(1e-12));
    }

    // Flat normal map: every channel is constant.
    const NormalMap flat(8, 8,
                         std::vector<std::array<double, 3>>(64, {0.0, 0.0, 1.0}));
    const FeatureVector ff = extract(flat, DescriptorKind::LBP);
    CHECK(ff.bins[57] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(ff.bins[59 + 57] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(ff.bins[118 + 57] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

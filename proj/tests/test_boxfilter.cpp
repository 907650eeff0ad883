#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dgf/boxfilter.hpp"
#include "test_support.hpp"

using namespace dgf;
using namespace dgf_test;

TEST_CASE("radius zero is the identity") {
    Image2D img = random_image(9, 7, 11);
    Image2D out = box_mean(img, WindowSpec{0});
    CHECK(max_abs_diff(img, out) == 0.0);
    Image2D brute = box_mean_bruteforce(img, WindowSpec{0});
    CHECK(max_abs_diff(img, brute) == 0.0);
}

TEST_CASE("constant image stays constant") {
    for (int r : {1, 3, 6}) {
        Image2D img(17, 13, 0.37);
        Image2D out = box_mean(img, WindowSpec{r});
        for (std::size_t i = 0; i < out.size(); ++i)
            CHECK(out[i] == doctest::Approx(0.37).epsilon(1e-14));
    }
}

TEST_CASE("3x3 ramp with r=1 matches hand-computed means") {
    std::vector<double> px{1, 2, 3, 4, 5, 6, 7, 8, 9};
    Image2D img = Image2D::from_data(3, 3, px);
    Image2D out = box_mean(img, WindowSpec{1});
    CHECK(out.at(1, 1) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(out.at(0, 0) == doctest::Approx((1 + 2 + 4 + 5) / 4.0).epsilon(1e-15));
    Image2D brute = box_mean_bruteforce(img, WindowSpec{1});
    CHECK(max_abs_diff(out, brute) <= 1e-15);
}

TEST_CASE("sliding-sum agrees with brute force on random images") {
    double worst = 0.0;
    int case_id = 0;
    for (int r : {1, 2, 5, 8})
        for (int k = 0; k < 25; ++k) {
            Image2D img = random_image(32, 32, 1000 + case_id++);
            Image2D fast = box_mean(img, WindowSpec{r});
            Image2D brute = box_mean_bruteforce(img, WindowSpec{r});
            worst = std::max(worst, max_abs_diff(fast, brute));
        }
    CHECK(worst <= 1e-12);
}

TEST_CASE("window counts") {
    Image2D c = window_count(5, 5, WindowSpec{1});
    CHECK(c.at(2, 2) == 9.0);
    CHECK(c.at(0, 0) == 4.0);
    CHECK(c.at(2, 0) == 6.0);

    Image2D ones = window_count(6, 4, WindowSpec{0});
    for (std::size_t i = 0; i < ones.size(); ++i) CHECK(ones[i] == 1.0);

    // total count equals the enumerated sum of window sizes
    Image2D c2 = window_count(7, 7, WindowSpec{2});
    double total = 0.0;
    for (std::size_t i = 0; i < c2.size(); ++i) total += c2[i];
    double expected = 0.0;
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) {
            int cx = std::min(x + 2, 6) - std::max(x - 2, 0) + 1;
            int cy = std::min(y + 2, 6) - std::max(y - 2, 0) + 1;
            expected += cx * cy;
        }
    CHECK(total == expected);
}

TEST_CASE("linearity over random pairs") {
    for (int k = 0; k < 10; ++k) {
        Image2D a = random_image(40, 33, 50 + k);
        Image2D b = random_image(40, 33, 150 + k);
        double alpha = 1.7, beta = -0.4;
        Image2D combo(40, 33);
        for (std::size_t i = 0; i < combo.size(); ++i)
            combo[i] = alpha * a[i] + beta * b[i];
        Image2D lhs = box_mean(combo, WindowSpec{3});
        Image2D ma = box_mean(a, WindowSpec{3});
        Image2D mb = box_mean(b, WindowSpec{3});
        double worst = 0.0;
        for (std::size_t i = 0; i < lhs.size(); ++i)
            worst = std::max(worst, std::abs(lhs[i] - (alpha * ma[i] + beta * mb[i])));
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("sum of means equals sum of count-normalized contributions") {
    // window membership is symmetric, so sum(out) = sum(in_j * sum_{k in w_j} 1/|w_k|)
    Image2D img = random_image(21, 18, 99);
    WindowSpec w{4};
    Image2D out = box_mean(img, w);
    double lhs = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) lhs += out[i];
    double rhs = 0.0;
    for (int y = 0; y < 18; ++y)
        for (int x = 0; x < 21; ++x) {
            int x0 = std::max(x - w.radius, 0), x1 = std::min(x + w.radius, 20);
            int y0 = std::max(y - w.radius, 0), y1 = std::min(y + w.radius, 17);
            double weight = 0.0;
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) {
                    int cx = std::min(xx + w.radius, 20) - std::max(xx - w.radius, 0) + 1;
                    int cy = std::min(yy + w.radius, 17) - std::max(yy - w.radius, 0) + 1;
                    weight += 1.0 / (cx * cy);
                }
            rhs += img.at(x, y) * weight;
        }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("radius >= min extent is rejected") {
    Image2D img(8, 5);
    CHECK_THROWS_AS(box_mean(img, WindowSpec{5}), config_error);
    CHECK_THROWS_AS(box_mean_bruteforce(img, WindowSpec{5}), config_error);
    CHECK_THROWS_AS(window_count(8, 5, WindowSpec{5}), config_error);
    CHECK_NOTHROW(box_mean(img, WindowSpec{4}));
}

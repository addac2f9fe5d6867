#include <croptrack/eval.hpp>

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "test_util.hpp"

using namespace croptrack;

namespace {

Detection det(const BoundingBox& box, double fg, std::size_t label,
              std::size_t n_labels = 3) {
    Detection d;
    d.box = box;
    d.fg_score = fg;
    d.quality_scores.assign(n_labels, 0.05);
    d.quality_scores[label] = 0.9;
    return d;
}

GroundTruthObject gt(const BoundingBox& box, std::size_t quality) {
    return GroundTruthObject{box, quality};
}

}  // namespace

TEST_CASE("match_frame: identical boxes all match") {
    std::vector<Detection> dets;
    std::vector<GroundTruthObject> gts;
    for (int i = 0; i < 3; ++i) {
        const BoundingBox b(i * 20.0, 0, i * 20.0 + 10, 10);
        dets.push_back(det(b, 0.9, 0));
        gts.push_back(gt(b, 0));
    }
    const auto r = match_frame(dets, gts, 0.5);
    CHECK(r.counts.tp == 3);
    CHECK(r.counts.fp == 0);
    CHECK(r.counts.fn == 0);
    CHECK(r.counts.tn == 0);
    REQUIRE(r.pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r.pairs[i] == std::pair<std::size_t, std::size_t>{i, i});
    }
}

TEST_CASE("match_frame: disjoint boxes are FP and FN") {
    const auto r = match_frame({det(BoundingBox(0, 0, 10, 10), 0.9, 0)},
                               {gt(BoundingBox(50, 50, 60, 60), 1)}, 0.5);
    CHECK(r.counts.tp == 0);
    CHECK(r.counts.fp == 1);
    CHECK(r.counts.fn == 1);
    CHECK(r.pairs.empty());
}

TEST_CASE("match_frame: one ground truth absorbs only the best detection") {
    const BoundingBox target(0, 0, 10, 10);
    const auto r = match_frame({det(BoundingBox(1, 0, 11, 10), 0.9, 0),
                                det(BoundingBox(0.5, 0, 10.5, 10), 0.8, 0)},
                               {gt(target, 0)}, 0.3);
    CHECK(r.counts.tp == 1);
    CHECK(r.counts.fp == 1);
    CHECK(r.counts.fn == 0);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0] == std::pair<std::size_t, std::size_t>{1, 0});  // the closer det
}

TEST_CASE("match_frame: the IoU threshold is inclusive") {
    // iou = 30/100 exactly
    const auto dets = std::vector<Detection>{det(BoundingBox(0, 0, 10, 3), 0.9, 0)};
    const auto gts = std::vector<GroundTruthObject>{gt(BoundingBox(0, 0, 10, 10), 0)};
    CHECK(match_frame(dets, gts, 0.3).counts.tp == 1);
    CHECK(match_frame(dets, gts, 0.31).counts.tp == 0);
}

TEST_CASE("match_frame: ties prefer lower indices") {
    const BoundingBox b(0, 0, 10, 10);
    // two identical dets on one gt: det 0 wins
    auto r = match_frame({det(b, 0.9, 0), det(b, 0.9, 0)}, {gt(b, 0)}, 0.5);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
    // one det on two identical gts: gt 0 wins
    r = match_frame({det(b, 0.9, 0)}, {gt(b, 0), gt(b, 0)}, 0.5);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
}

TEST_CASE("match_frame validates the threshold") {
    CHECK_THROWS_AS(match_frame({}, {}, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(match_frame({}, {}, 1.5), std::invalid_argument);
    CHECK_NOTHROW(match_frame({}, {}, 1.0));
}

TEST_CASE("precision and recall with vacuous denominators") {
    CHECK(precision_recall({3, 1, 1, 0}) == std::pair<double, double>{0.75, 0.75});
    CHECK(precision_recall({0, 0, 0, 0}) == std::pair<double, double>{1.0, 1.0});
    CHECK(precision_recall({0, 5, 2, 0}) == std::pair<double, double>{0.0, 0.0});
    CHECK(precision_recall({0, 0, 2, 0}) == std::pair<double, double>{1.0, 0.0});
}

namespace {

// one clean frame plus one frame with a low-confidence spurious box
std::pair<std::vector<FrameDetections>, std::vector<GroundTruthFrame>> tiny_scene() {
    std::vector<FrameDetections> frames(2);
    std::vector<GroundTruthFrame> gts(2);
    const BoundingBox a(10, 10, 30, 30), b(50, 50, 80, 80);
    frames[0].frame_index = 0;
    frames[0].detections = {det(a, 0.9, 0), det(b, 0.8, 2)};
    gts[0].frame_index = 0;
    gts[0].objects = {gt(a, 0), gt(b, 2)};
    frames[1].frame_index = 1;
    frames[1].detections = {det(a, 0.85, 1), det(BoundingBox(60, 5, 70, 15), 0.2, 0)};
    gts[1].frame_index = 1;
    gts[1].objects = {gt(a, 1)};
    return {frames, gts};
}

}  // namespace

TEST_CASE("pr_curve sweeps score thresholds") {
    const auto [frames, gts] = tiny_scene();
    const auto curve = pr_curve(frames, gts, 0.5, {0.0, 0.5, 0.95});
    REQUIRE(curve.size() == 3);
    // t=0: the spurious low-score box costs precision
    CHECK(curve[0].precision == doctest::Approx(3.0 / 4.0));
    CHECK(curve[0].recall == 1.0);
    // t=0.5 drops it
    CHECK(curve[1].precision == 1.0);
    CHECK(curve[1].recall == 1.0);
    // t=0.95 drops everything: vacuous precision, zero recall
    CHECK(curve[2].precision == 1.0);
    CHECK(curve[2].recall == 0.0);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        CHECK(curve[i].score_threshold == std::vector<double>{0.0, 0.5, 0.95}[i]);
    }
}

TEST_CASE("pr_curve rejects a non-increasing threshold list") {
    const auto [frames, gts] = tiny_scene();
    CHECK_THROWS_AS(pr_curve(frames, gts, 0.5, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(pr_curve(frames, gts, 0.5, {0.5, 0.2}), std::invalid_argument);
    // an empty list is vacuously increasing and yields an empty curve
    CHECK(pr_curve(frames, gts, 0.5, {}).empty());
}

TEST_CASE("pr_curve aligns one-sided frames as pure noise or misses") {
    std::vector<FrameDetections> frames(1);
    frames[0].frame_index = 0;
    frames[0].detections = {det(BoundingBox(0, 0, 10, 10), 0.9, 0)};
    std::vector<GroundTruthFrame> gts(1);
    gts[0].frame_index = 1;
    gts[0].objects = {gt(BoundingBox(0, 0, 10, 10), 0)};
    const auto curve = pr_curve(frames, gts, 0.5, {0.0});
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].precision == 0.0);  // the det frame has no truth
    CHECK(curve[0].recall == 0.0);     // the truth frame has no dets
}

TEST_CASE("equal-error F1 at an exactly sampled point") {
    for (double v : {0.25, 0.5, 0.773, 1.0}) {
        const auto r = f1_equal_error({{0.5, v, v}});
        CHECK(r.f1 == doctest::Approx(100.0 * v).epsilon(1e-12));
        CHECK(r.crossing_found);
        CHECK(!r.interpolated);
        CHECK(r.score_threshold == 0.5);
    }
    // the sampled point also wins against surrounding crossings
    const double v = 0.62, d = 0.19;
    const auto r = f1_equal_error(
        {{0.3, v - d, v + d}, {0.5, v, v}, {0.7, v + d, v - d}});
    CHECK(r.f1 == doctest::Approx(100.0 * v).epsilon(1e-12));
    CHECK(!r.interpolated);
}

TEST_CASE("equal-error F1 interpolates a sign change") {
    const auto r = f1_equal_error({{0.4, 0.70, 0.80}, {0.6, 0.80, 0.70}});
    CHECK(r.crossing_found);
    CHECK(r.interpolated);
    CHECK(r.f1 == doctest::Approx(75.0).epsilon(1e-9));
    CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(r.recall == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(r.score_threshold == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("equal-error F1 from a curve crossing near 0.773") {
    const auto r = f1_equal_error({{0.4, 0.746, 0.800}, {0.6, 0.800, 0.746}});
    CHECK(r.crossing_found);
    CHECK(std::abs(r.f1 - 77.3) <= 0.1);
}

TEST_CASE("equal-error F1 without a crossing flags the fallback") {
    const auto r = f1_equal_error({{0.2, 0.9, 0.5}, {0.4, 0.92, 0.4}, {0.6, 0.95, 0.3}});
    CHECK(!r.crossing_found);
    CHECK(!r.interpolated);
    CHECK(r.score_threshold == 0.2);  // smallest |P - R|
    CHECK(r.f1 == doctest::Approx(100.0 * 2 * 0.9 * 0.5 / 1.4));
}

TEST_CASE("equal-error F1 handles the all-zero point") {
    const auto r = f1_equal_error({{0.5, 0.0, 0.0}});
    CHECK(r.f1 == 0.0);
    CHECK(r.crossing_found);
    CHECK_THROWS_AS(f1_equal_error({}), std::invalid_argument);
}

TEST_CASE("confusion rows normalize exactly") {
    std::vector<LabeledPair> pairs;
    auto add = [&](std::size_t g, std::size_t p, int n) {
        for (int i = 0; i < n; ++i) pairs.push_back({g, p});
    };
    add(0, 0, 940); add(0, 1, 48); add(0, 2, 12);
    add(1, 0, 136); add(1, 1, 627); add(1, 2, 237);
    add(2, 0, 7);   add(2, 1, 98);  add(2, 2, 895);
    const auto c = quality_confusion(pairs, LabelSet{});

    const double expect[3][3] = {{94.0, 4.8, 1.2}, {13.6, 62.7, 23.7}, {0.7, 9.8, 89.5}};
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(c.row_total(r) == 1000);
        double sum = 0.0;
        for (std::size_t col = 0; col < 3; ++col) {
            const auto p = c.percent(r, col);
            REQUIRE(p.has_value());
            CHECK(*p == doctest::Approx(expect[r][col]).epsilon(1e-9));
            sum += *p;
        }
        CHECK(std::abs(sum - 100.0) <= 0.1);
    }
}

TEST_CASE("confusion with empty rows has undefined percentages") {
    const auto c = quality_confusion({{2, 1}}, LabelSet{});
    CHECK(c.row_total(0) == 0);
    CHECK(!c.percent(0, 0).has_value());
    REQUIRE(c.percent(2, 1).has_value());
    CHECK(*c.percent(2, 1) == 100.0);
    CHECK(*c.percent(2, 0) == 0.0);
}

TEST_CASE("label pairs come from matched boxes only") {
    const auto [frames, gts] = tiny_scene();
    const auto pairs = collect_label_pairs(frames, gts, 0.5, 0.5);
    // three true objects matched; the low-score box is filtered out
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].gt_label == 0);
    CHECK(pairs[0].predicted_label == 0);
    CHECK(pairs[1].gt_label == 2);
    CHECK(pairs[1].predicted_label == 2);
    CHECK(pairs[2].gt_label == 1);
    CHECK(pairs[2].predicted_label == 1);
}

TEST_CASE("count percent error reproduces the published table") {
    const LabelSet labels;
    const auto r = count_percent_error({159, 38, 227}, {179, 34, 229}, labels);
    REQUIRE(r.per_label.size() == 3);
    CHECK(*r.per_label[0] == doctest::Approx(100.0 * 20 / 179).epsilon(1e-12));
    CHECK(*r.per_label[1] == doctest::Approx(100.0 * 4 / 34).epsilon(1e-12));
    CHECK(*r.per_label[2] == doctest::Approx(100.0 * 2 / 229).epsilon(1e-12));
    CHECK(*r.total == doctest::Approx(100.0 * 18 / 442).epsilon(1e-12));
    // the rounded headline values
    CHECK(std::abs(*r.per_label[0] - 11.2) <= 0.05);
    CHECK(std::abs(*r.per_label[1] - 11.8) <= 0.05);
    CHECK(std::abs(*r.per_label[2] - 0.9) <= 0.05);
    CHECK(std::abs(*r.total - 4.1) <= 0.05);
}

TEST_CASE("count percent error edge cases") {
    const LabelSet labels;
    const auto exact = count_percent_error({5, 0, 7}, {5, 0, 7}, labels);
    CHECK(*exact.per_label[0] == 0.0);
    CHECK(*exact.per_label[1] == 0.0);  // zero truth, zero estimate
    CHECK(*exact.total == 0.0);

    const auto undef = count_percent_error({5, 3, 7}, {5, 0, 7}, labels);
    CHECK(!undef.per_label[1].has_value());
    REQUIRE(undef.total.has_value());  // total truth is 12, not zero

    CHECK_THROWS_AS(count_percent_error({1, 2}, {1, 2, 3}, labels),
                    std::invalid_argument);

    // all-zero truth with a nonzero estimate: even the total is undefined
    const auto z = count_percent_error({1, 0, 0}, {0, 0, 0}, labels);
    CHECK(!z.total.has_value());
}

TEST_CASE("ground truth streams parse and round-trip") {
    const std::string text =
        R"({"meta":{"width":100,"height":100}})" "\n"
        R"({"frame":0,"objects":[{"box":[0,0,10,10],"quality":"red"}]})" "\n"
        R"({"frame":1,"objects":[]})" "\n";
    std::istringstream in(text);
    const auto s = parse_ground_truth(in);
    REQUIRE(s.frames.size() == 2);
    REQUIRE(s.frames[0].objects.size() == 1);
    CHECK(s.frames[0].objects[0].quality == 2);
    CHECK(s.frames[0].objects[0].box == BoundingBox(0, 0, 10, 10));
    REQUIRE(s.meta.has_value());
    CHECK(s.meta->width == 100.0);

    std::ostringstream out;
    write_ground_truth(out, s);
    std::istringstream in2(out.str());
    const auto back = parse_ground_truth(in2);
    REQUIRE(back.frames.size() == 2);
    CHECK(back.frames[0].objects[0].box == s.frames[0].objects[0].box);
    CHECK(back.labels == s.labels);
}

TEST_CASE("ground truth parsing accepts any frame order but not duplicates") {
    std::istringstream shuffled(
        R"({"frame":4,"objects":[]})" "\n"
        R"({"frame":1,"objects":[]})" "\n");
    const auto s = parse_ground_truth(shuffled);
    REQUIRE(s.frames.size() == 2);
    CHECK(s.frames[0].frame_index == 1);
    CHECK(s.frames[1].frame_index == 4);

    std::istringstream dup(
        R"({"frame":2,"objects":[]})" "\n"
        R"({"frame":2,"objects":[]})" "\n");
    CHECK_THROWS_AS(parse_ground_truth(dup), ParseError);

    std::istringstream bad_label(
        R"({"frame":0,"objects":[{"box":[0,0,1,1],"quality":"chartreuse"}]})" "\n");
    CHECK_THROWS_AS(parse_ground_truth(bad_label), ParseError);
}

TEST_CASE("matching bookkeeping holds on random streams") {
    std::mt19937_64 rng(53);
    std::uniform_int_distribution<int> n_d(0, 7);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Detection> dets;
        std::vector<GroundTruthObject> gts;
        for (int i = n_d(rng); i > 0; --i) dets.push_back(testutil::random_detection(rng, 3, 50.0));
        for (int i = n_d(rng); i > 0; --i) gts.push_back(gt(testutil::random_box(rng, 50.0), 0));
        const auto r = match_frame(dets, gts, 0.3);

        CHECK(r.counts.tp + r.counts.fn == static_cast<std::int64_t>(gts.size()));
        CHECK(r.counts.tp + r.counts.fp == static_cast<std::int64_t>(dets.size()));
        CHECK(r.counts.tp == static_cast<std::int64_t>(r.pairs.size()));

        std::set<std::size_t> used_d, used_g;
        for (const auto& [di, gi] : r.pairs) {
            CHECK(used_d.insert(di).second);  // one-to-one
            CHECK(used_g.insert(gi).second);
            CHECK(iou(dets[di].box, gts[gi].box) >= 0.3);
        }
    }
}

TEST_CASE("recall never rises as the score threshold climbs") {
    std::mt19937_64 rng(59);
    std::vector<FrameDetections> frames;
    std::vector<GroundTruthFrame> gts;
    for (int f = 0; f < 12; ++f) {
        FrameDetections fd;
        fd.frame_index = f;
        GroundTruthFrame gf;
        gf.frame_index = f;
        for (int i = 0; i < 6; ++i) {
            auto d = testutil::random_detection(rng, 3, 60.0);
            fd.detections.push_back(d);
            if (i % 2 == 0) gf.objects.push_back(gt(d.box, 0));
        }
        frames.push_back(fd);
        gts.push_back(gf);
    }
    const auto curve = pr_curve(frames, gts, 0.5,
                                {0.0, 0.2, 0.4, 0.6, 0.8, 1.0});
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].recall <= curve[i - 1].recall);
    }
}

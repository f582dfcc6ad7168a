// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tsbench/tsbench.hpp"

using namespace tsbench;

namespace {

ChronologicalSplit whole_as_train(std::size_t t) {
    ChronologicalSplit s;
    s.train_range = {0, t};
    return s;
}

} // namespace

TEST(Scaler, TwoPointSymmetry) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{0.0}, {2.0}});
    ZScoreScaler sc = fit_scaler(ds, whole_as_train(2));
    EXPECT_DOUBLE_EQ(sc.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(sc.std[0], 1.0);
}

TEST(Scaler, MaskedEntriesExcluded) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{1.0}, {99.0}, {3.0}}, {{1}, {0}, {1}});
    ZScoreScaler sc = fit_scaler(ds, whole_as_train(3));
    EXPECT_DOUBLE_EQ(sc.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(sc.std[0], 1.0);
}

TEST(Scaler, ConstantChannelFloorsToEpsilon) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{5.0}, {5.0}, {5.0}});
    ZScoreScaler sc = fit_scaler(ds, whole_as_train(3));
    EXPECT_DOUBLE_EQ(sc.mean[0], 5.0);
    EXPECT_DOUBLE_EQ(sc.std[0], 1e-8);
}

TEST(Scaler, FullyMaskedChannel) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{7.0}, {8.0}}, {{0}, {0}});
    ZScoreScaler sc = fit_scaler(ds, whole_as_train(2));
    EXPECT_DOUBLE_EQ(sc.mean[0], 0.0);
    EXPECT_DOUBLE_EQ(sc.std[0], 1e-8);
}

TEST(Scaler, FitUsesOnlyTrainRange) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{0.0}, {2.0}, {1000.0}, {-1000.0}});
    ChronologicalSplit s;
    s.train_range = {0, 2};
    s.val_range = {2, 3};
    s.test_range = {3, 4};
    ZScoreScaler sc = fit_scaler(ds, s);
    EXPECT_DOUBLE_EQ(sc.mean[0], 1.0);
    EXPECT_DOUBLE_EQ(sc.std[0], 1.0);
}

TEST(Scaler, PopulationStatistics) {
    // Population (divide-by-n) std of [1,2,3,4]: sqrt(5/4).
    TimeSeriesDataset ds = tsb_test::make_dataset({{1.0}, {2.0}, {3.0}, {4.0}});
    ZScoreScaler sc = fit_scaler(ds, whole_as_train(4));
    EXPECT_DOUBLE_EQ(sc.mean[0], 2.5);
    EXPECT_DOUBLE_EQ(sc.std[0], std::sqrt(1.25));
}

TEST(Transform, HandValues) {
    ZScoreScaler sc;
    sc.mean = {1.0};
    sc.std = {1.0};
    Matrix block(2, 1);
    block(0, 0) = 0.0;
    block(1, 0) = 2.0;
    Matrix norm = transform(sc, block);
    EXPECT_DOUBLE_EQ(norm(0, 0), -1.0);
    EXPECT_DOUBLE_EQ(norm(1, 0), 1.0);
    Matrix back = inverse_transform(sc, norm);
    EXPECT_DOUBLE_EQ(back(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(back(1, 0), 2.0);

    ZScoreScaler sc2;
    sc2.mean = {0.0};
    sc2.std = {2.0};
    Matrix one(1, 1);
    one(0, 0) = 4.0;
    EXPECT_DOUBLE_EQ(transform(sc2, one)(0, 0), 2.0);
}

TEST(Transform, RoundTripWithinTolerance) {
    std::mt19937_64 rng(3);
    ZScoreScaler sc;
    for (int c = 0; c < 6; ++c) {
        sc.mean.push_back(tsb_test::uniform(rng, -50.0, 50.0));
        sc.std.push_back(tsb_test::uniform(rng, 1e-3, 20.0));
    }
    Matrix block = tsb_test::random_matrix(rng, 40, 6, -100.0, 100.0);
    Matrix round = inverse_transform(sc, transform(sc, block));
    for (std::size_t r = 0; r < block.rows(); ++r)
        for (std::size_t c = 0; c < block.cols(); ++c)
            EXPECT_TRUE(tsb_test::near_rel(round(r, c), block(r, c), 1e-12))
                << round(r, c) << " vs " << block(r, c);
}

TEST(Transform, ShapeMismatchThrows) {
    ZScoreScaler sc;
    sc.mean = {0.0, 0.0};
    sc.std = {1.0, 1.0};
    Matrix block(3, 3);
    EXPECT_THROW(transform_inplace(sc, block), ShapeError);
    EXPECT_THROW(inverse_transform_inplace(sc, block), ShapeError);
}

TEST(TemporalFeatures, EpochIsThursdayMidnight) {
    TemporalFeatures f = make_temporal_features(0, 3600, 30);
    EXPECT_DOUBLE_EQ(f.time_of_day[0], 0.0);
    EXPECT_EQ(f.day_of_week[0], 3); // 1970-01-01 was a Thursday; Monday = 0
    EXPECT_DOUBLE_EQ(f.time_of_day[6], 0.25);
    EXPECT_EQ(f.day_of_week[24], 4);
}

TEST(TemporalFeatures, DailyPeriodicity) {
    TemporalFeatures f = make_temporal_features(86400 * 3 + 7200, 1800, 200);
    std::size_t per_day = 86400 / 1800;
    for (std::size_t t = 0; t + per_day < 200; ++t)
        EXPECT_DOUBLE_EQ(f.time_of_day[t], f.time_of_day[t + per_day]);
}

TEST(TemporalFeatures, NegativeTimestamps) {
    TemporalFeatures f = make_temporal_features(-3600, 3600, 2);
    EXPECT_DOUBLE_EQ(f.time_of_day[0], 82800.0 / 86400.0);
    EXPECT_EQ(f.day_of_week[0], 2); // 1969-12-31 was a Wednesday
    EXPECT_DOUBLE_EQ(f.time_of_day[1], 0.0);
    EXPECT_EQ(f.day_of_week[1], 3);
}

TEST(TemporalFeatures, MondayStart) {
    // 2024-01-01 00:00 UTC was a Monday.
    TemporalFeatures f = make_temporal_features(1704067200, 86400, 3);
    EXPECT_EQ(f.day_of_week[0], 0);
    EXPECT_EQ(f.day_of_week[1], 1);
    EXPECT_EQ(f.day_of_week[2], 2);
}

TEST(TemporalFeatures, BadFrequencyThrows) {
    EXPECT_THROW(make_temporal_features(0, 0, 5), ConfigError);
}

TEST(Windows, AnchorEnumeration) {
    std::vector<std::size_t> a = make_windows({0, 10}, 3, 2, 1);
    ASSERT_EQ(a.size(), 6u);
    EXPECT_EQ(a.front(), 3u);
    EXPECT_EQ(a.back(), 8u);

    std::vector<std::size_t> b = make_windows({0, 10}, 3, 2, 5);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_EQ(b[0], 3u);
    EXPECT_EQ(b[1], 8u);
}

TEST(Windows, CountFormulaStrideOne) {
    for (std::size_t len = 8; len <= 30; ++len)
        for (std::size_t tp = 1; tp <= 4; ++tp)
            for (std::size_t tf = 1; tf <= 4; ++tf) {
                if (len < tp + tf) continue;
                EXPECT_EQ(make_windows({5, 5 + len}, tp, tf).size(), len - tp - tf + 1);
            }
}

TEST(Windows, StayInsideRange) {
    IndexRange range{17, 63};
    std::size_t tp = 5, tf = 4;
    for (std::size_t t : make_windows(range, tp, tf, 3)) {
        EXPECT_GE(t - tp, range.begin);
        EXPECT_LE(t + tf, range.end);
    }
}

TEST(Windows, TooShortThrows) {
    EXPECT_THROW(make_windows({0, 5}, 3, 3), WindowError);
    EXPECT_THROW(make_windows({0, 10}, 0, 3), SpecError);
    EXPECT_THROW(make_windows({0, 10}, 3, 3, 0), SpecError);
}

TEST(Windows, CutWindowAlignment) {
    TimeSeriesDataset ds = tsb_test::make_dataset(
        {{0.0, 10.0}, {1.0, 11.0}, {2.0, 12.0}, {3.0, 13.0}, {4.0, 14.0}},
        {{1, 1}, {1, 0}, {1, 1}, {0, 1}, {1, 1}});
    WindowSample s = cut_window(ds.values, ds.mask, 2, 2, 2);
    EXPECT_EQ(s.history(0, 0), 0.0);
    EXPECT_EQ(s.history(1, 1), 11.0);
    EXPECT_FALSE(s.history_mask(1, 1));
    EXPECT_EQ(s.future(0, 0), 2.0);
    EXPECT_EQ(s.future(1, 1), 13.0);
    EXPECT_FALSE(s.future_mask(1, 0));
    EXPECT_EQ(s.anchor, 2u);
    EXPECT_THROW(cut_window(ds.values, ds.mask, 1, 2, 2), WindowError);
    EXPECT_THROW(cut_window(ds.values, ds.mask, 4, 2, 2), WindowError);
}

TEST(Features, AugmentAppendsSharedChannels) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{1.0}, {2.0}, {3.0}, {4.0}});
    TemporalFeatures f = make_temporal_features(0, 21600, 4); // 6h steps
    WindowSample s = cut_window(ds.values, ds.mask, 2, 2, 2);

    FeatureFlags both;
    both.time_of_day = true;
    both.day_of_week = true;
    WindowSample aug = augment_features(s, f, both);
    ASSERT_EQ(aug.history.cols(), 3u);
    EXPECT_EQ(aug.future.cols(), 1u);
    EXPECT_DOUBLE_EQ(aug.history(0, 1), 0.0);        // t=0 midnight
    EXPECT_DOUBLE_EQ(aug.history(1, 1), 0.25);       // t=1 six o'clock
    EXPECT_DOUBLE_EQ(aug.history(0, 2), 3.0 / 7.0);  // Thursday
    EXPECT_TRUE(aug.history_mask(0, 1));
    EXPECT_TRUE(aug.history_mask(1, 2));
    EXPECT_EQ(aug.history(1, 0), 2.0);

    FeatureFlags off;
    WindowSample same = augment_features(s, f, off);
    EXPECT_TRUE(same.history == s.history);
    EXPECT_TRUE(same.history_mask == s.history_mask);
}

TEST(Features, TimeOfDayOnly) {
    TimeSeriesDataset ds = tsb_test::make_dataset({{1.0}, {2.0}, {3.0}});
    TemporalFeatures f = make_temporal_features(0, 3600, 3);
    WindowSample s = cut_window(ds.values, ds.mask, 1, 1, 1);
    FeatureFlags tod;
    tod.time_of_day = true;
    WindowSample aug = augment_features(s, f, tod);
    ASSERT_EQ(aug.history.cols(), 2u);
    EXPECT_DOUBLE_EQ(aug.history(0, 1), 0.0);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "qsched/sim_core.hpp"

using namespace qsched;

namespace {

struct Tag {
    int id = 0;
};

}  // namespace

TEST(SimTime, UnitsAndArithmetic) {
    EXPECT_EQ(SimTime::ms(5).ticks, 5000);
    EXPECT_EQ(SimTime::sec(100).ticks, 100'000'000);
    EXPECT_EQ(SimTime::from_seconds(2.12).ticks, 2'120'000);
    EXPECT_EQ((SimTime::us(7) + SimTime::us(3)).ticks, 10);
    EXPECT_EQ((SimTime::us(7) - SimTime::us(3)).ticks, 4);
    EXPECT_LT(SimTime::us(1), SimTime::us(2));
    EXPECT_DOUBLE_EQ(SimTime::ms(1500).seconds(), 1.5);
}

TEST(Engine, ScheduleAtNowIsAcceptedAndFiresFirst) {
    Engine<Tag> eng;
    std::vector<int> seen;
    eng.schedule(SimTime::us(10), EventKind::PacketArrival, Tag{2});
    eng.schedule(SimTime{}, EventKind::FrameBoundary, Tag{1});
    eng.run_until(SimTime::us(100), [&](const Event<Tag>& ev, Engine<Tag>&) { seen.push_back(ev.payload.id); });
    EXPECT_EQ(seen, (std::vector<int>{1, 2}));
}

TEST(Engine, TiesPopInInsertionOrder) {
    Engine<Tag> eng;
    for (int i = 0; i < 6; ++i) eng.schedule(SimTime::us(50), EventKind::PacketArrival, Tag{i});
    std::vector<int> seen;
    eng.run_until(SimTime::us(50), [&](const Event<Tag>& ev, Engine<Tag>&) { seen.push_back(ev.payload.id); });
    EXPECT_EQ(seen, (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(Engine, SchedulingInThePastThrows) {
    Engine<Tag> eng;
    eng.run_until(SimTime::us(10), [](const auto&, auto&) {});
    EXPECT_THROW(eng.schedule(SimTime::us(5), EventKind::SimEnd), SchedulingInPast);
    EXPECT_NO_THROW(eng.schedule(SimTime::us(10), EventKind::SimEnd));
}

TEST(Engine, EmptyQueueParksClockAtEnd) {
    Engine<Tag> eng;
    const auto n = eng.run_until(SimTime::sec(100), [](const auto&, auto&) {});
    EXPECT_EQ(n, 0u);
    EXPECT_EQ(eng.now(), SimTime::sec(100));
}

TEST(Engine, HorizonCutLeavesLaterEventsQueued) {
    Engine<Tag> eng;
    eng.schedule(SimTime::sec(1), EventKind::PacketArrival);
    eng.schedule(SimTime::sec(2), EventKind::PacketArrival);
    eng.schedule(SimTime::sec(101), EventKind::PacketArrival);
    EXPECT_EQ(eng.run_until(SimTime::sec(100), [](const auto&, auto&) {}), 2u);
    EXPECT_EQ(eng.pending(), 1u);
    EXPECT_EQ(eng.now().ticks, 100'000'000);
}

TEST(Engine, HandlersCanScheduleFollowUps) {
    Engine<Tag> eng;
    eng.schedule(SimTime{}, EventKind::FrameBoundary, Tag{0});
    int count = 0;
    eng.run_until(SimTime::ms(20), [&](const Event<Tag>& ev, Engine<Tag>& e) {
        ++count;
        e.schedule(ev.fire_at + SimTime::ms(5), EventKind::FrameBoundary, Tag{ev.payload.id + 1});
    });
    EXPECT_EQ(count, 5);  // 0, 5, 10, 15, 20 ms
}

// Random event sets pop sorted by (fire_at, seq) and the clock never goes back.
TEST(EngineProperty, ProcessedSequenceIsSorted) {
    for (std::uint64_t seed = 1; seed <= 25; ++seed) {
        RngStream rng(seed, StreamId::Traffic);
        Engine<Tag> eng;
        const int n = 200 + static_cast<int>(rng.below(300));
        for (int i = 0; i < n; ++i) {
            eng.schedule(SimTime::us(static_cast<std::int64_t>(rng.below(1000))), EventKind::PacketArrival, Tag{i});
        }
        std::vector<std::pair<std::int64_t, std::uint64_t>> order;
        SimTime last{};
        bool monotone = true;
        eng.run_until(SimTime::us(2000), [&](const Event<Tag>& ev, Engine<Tag>& e) {
            monotone = monotone && e.now() >= last;
            last = e.now();
            order.emplace_back(ev.fire_at.ticks, ev.seq);
            // Occasional follow-up inside the horizon.
            if (ev.payload.id % 7 == 0) e.schedule(e.now() + SimTime::us(3), EventKind::PacketArrival, Tag{-1});
        });
        EXPECT_TRUE(monotone);
        EXPECT_TRUE(std::is_sorted(order.begin(), order.end())) << "seed " << seed;
        std::vector<std::uint64_t> seqs;
        for (auto& [t, s] : order) seqs.push_back(s);
        std::sort(seqs.begin(), seqs.end());
        EXPECT_EQ(std::adjacent_find(seqs.begin(), seqs.end()), seqs.end()) << "duplicate seq";
    }
}

TEST(Rng, SameSeedSameSequence) {
    RngStream a(42, StreamId::Mobility), b(42, StreamId::Mobility);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAreIndependentOfEachOther) {
    RngStream m(42, StreamId::Mobility), t(42, StreamId::Traffic), c(42, StreamId::Contention);
    const auto x = m.next_u64(), y = t.next_u64(), z = c.next_u64();
    EXPECT_NE(x, y);
    EXPECT_NE(y, z);
    EXPECT_NE(x, z);
    RngStream other(43, StreamId::Mobility);
    RngStream again(42, StreamId::Mobility);
    EXPECT_NE(other.next_u64(), again.next_u64());
}

// mt19937_64 output is fixed by the standard; the seed mixing is ours. Frozen
// first draws guard against accidental changes to either.
TEST(Rng, FrozenFirstDraws) {
    RngStream r(1, StreamId::Mobility);
    const auto first = r.next_u64();
    std::mt19937_64 ref(mix_seed(1ULL ^ mix_seed(1ULL)));
    EXPECT_EQ(first, ref());
    EXPECT_EQ(mix_seed(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, BelowStaysInRange) {
    RngStream r(7, StreamId::Contention);
    std::vector<int> hist(16, 0);
    for (int i = 0; i < 16000; ++i) {
        const auto v = r.below(16);
        ASSERT_LT(v, 16u);
        ++hist[v];
    }
    for (int h : hist) EXPECT_NEAR(h, 1000, 150);
    EXPECT_EQ(r.below(1), 0u);
}

TEST(DrawUniform, DegenerateInterval) {
    RngStream r(1, StreamId::Traffic);
    EXPECT_EQ(draw_uniform(r, 3.0, 3.0), 3.0);
}

TEST(DrawUniform, InvertedRangeThrows) {
    RngStream r(1, StreamId::Traffic);
    EXPECT_THROW(draw_uniform(r, 2.0, 1.0), InvalidRange);
}

TEST(DrawUniform, MeanOfUnitDraws) {
    RngStream r(2024, StreamId::Traffic);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double v = draw_uniform(r, 0.0, 1.0);
        ASSERT_GE(v, 0.0);
        ASSERT_LT(v, 1.0);
        sum += v;
    }
    EXPECT_NEAR(sum / 100000.0, 0.5, 0.01);
}

TEST(DrawUniform, HalfOpenOnWideIntervals) {
    RngStream r(5, StreamId::Mobility);
    for (int i = 0; i < 10000; ++i) {
        const double v = draw_uniform(r, -1000.0, 1000.0);
        ASSERT_GE(v, -1000.0);
        ASSERT_LT(v, 1000.0);
    }
}

TEST(Rng, StandardNormalMoments) {
    RngStream r(9, StreamId::Traffic);
    double s = 0, s2 = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double z = r.standard_normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.02);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

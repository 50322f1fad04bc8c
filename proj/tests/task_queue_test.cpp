#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "webswarm/error.hpp"
#include "webswarm/random.hpp"
#include "webswarm/task_queue.hpp"

using namespace webswarm;

namespace {

Task make(const std::string& id) {
  Task t;
  t.task_id = id;
  t.kernel_id = "add";
  t.payload = {{"a", 1}, {"b", 2}};
  return t;
}

std::vector<std::string> ids(const std::vector<Task>& ts) {
  std::vector<std::string> out;
  for (const auto& t : ts) out.push_back(t.task_id);
  return out;
}

using Ids = std::vector<std::string>;

}  // namespace

TEST(TaskQueue, EnqueueIntoEmpty) {
  TaskQueue q;
  q.enqueue(make("A"));
  EXPECT_EQ(q.order(), Ids{"A"});
}

TEST(TaskQueue, EnqueueTwiceThrows) {
  TaskQueue q;
  q.enqueue(make("A"));
  EXPECT_THROW(q.enqueue(make("A")), DuplicateTaskId);
}

TEST(TaskQueue, FifoAppend) {
  TaskQueue q;
  for (auto id : {"A", "B", "C"}) q.enqueue(make(id));
  EXPECT_EQ(q.order(), (Ids{"A", "B", "C"}));
}

TEST(TaskQueue, TakeRotatesHeadToTail) {
  TaskQueue q;
  for (auto id : {"A", "B", "C"}) q.enqueue(make(id));
  EXPECT_EQ(ids(q.take_next(1)), Ids{"A"});
  EXPECT_EQ(q.order(), (Ids{"B", "C", "A"}));
  EXPECT_EQ(ids(q.take_next(2)), (Ids{"B", "C"}));
  EXPECT_EQ(q.order(), (Ids{"A", "B", "C"}));
}

TEST(TaskQueue, SingletonRotationIsIdentity) {
  TaskQueue q;
  q.enqueue(make("A"));
  EXPECT_EQ(ids(q.take_next(3)), Ids{"A"});
  EXPECT_EQ(q.order(), Ids{"A"});
}

// Two clients each take two tasks from [A, B]: both get the same pair.
TEST(TaskQueue, TwoClientRaceGetsSameTasks) {
  TaskQueue q;
  q.enqueue(make("A"));
  q.enqueue(make("B"));
  EXPECT_EQ(ids(q.take_next(2)), (Ids{"A", "B"}));
  EXPECT_EQ(ids(q.take_next(2)), (Ids{"A", "B"}));
  EXPECT_EQ(q.find("A")->dispatch_count, 2u);
}

TEST(TaskQueue, TakeFromEmpty) {
  TaskQueue q;
  EXPECT_TRUE(q.take_next(5).empty());
}

TEST(TaskQueue, FirstCheckpointApplied) {
  TaskQueue q;
  q.enqueue(make("A"));
  EXPECT_EQ(q.apply_partial("A", CheckpointRecord{1, {{"hits", 3}}, 10}), PartialStatus::Applied);
  auto t = q.find("A");
  EXPECT_EQ(t->payload["hits"], 3);
  EXPECT_EQ(t->payload["a"], 1);
  EXPECT_EQ(t->checkpoint->progress_units, 10u);
}

// Client X reports stage 2 before the slower client Y reports stage 1.
TEST(TaskQueue, LaterStageWins) {
  TaskQueue q;
  q.enqueue(make("A"));
  EXPECT_EQ(q.apply_partial("A", CheckpointRecord{2, {{"hits", 20}}, 200}), PartialStatus::Applied);
  EXPECT_EQ(q.apply_partial("A", CheckpointRecord{1, {{"hits", 10}}, 100}), PartialStatus::Stale);
  EXPECT_EQ(q.apply_partial("A", CheckpointRecord{2, {{"hits", 99}}, 200}), PartialStatus::Stale);
  EXPECT_EQ(q.find("A")->payload["hits"], 20);
  EXPECT_EQ(q.find("A")->checkpoint->sequence, 2u);
}

TEST(TaskQueue, PartialAfterCompletion) {
  TaskQueue q;
  q.enqueue(make("A"));
  q.complete("A", {{"sum", 3}}, 1);
  EXPECT_EQ(q.apply_partial("A", CheckpointRecord{5, {}, 1}), PartialStatus::AlreadyComplete);
}

TEST(TaskQueue, CompleteTwiceIsDuplicate) {
  TaskQueue q;
  q.enqueue(make("A"));
  Payload first;
  Payload second = "untouched";
  EXPECT_EQ(q.complete("A", {{"sum", 3}}, 1, &first), CompletionStatus::Accepted);
  EXPECT_EQ(q.complete("A", {{"sum", 4}}, 1, &second), CompletionStatus::Duplicate);
  EXPECT_EQ(first["sum"], 3);
  EXPECT_EQ(second, "untouched");
  EXPECT_EQ(q.completed_count(), 1u);
}

TEST(TaskQueue, UnknownIds) {
  TaskQueue q;
  EXPECT_THROW(q.complete("X", {}, 1), UnknownTask);
  EXPECT_THROW(q.apply_partial("X", {}), UnknownTask);
}

TEST(TaskQueue, Drained) {
  TaskQueue q;
  EXPECT_TRUE(q.drained());
  q.enqueue(make("A"));
  EXPECT_FALSE(q.drained());
  q.complete("A", {}, 1);
  EXPECT_TRUE(q.drained());
  EXPECT_THROW(q.enqueue(make("A")), DuplicateTaskId);
}

// Random operation sequences against a plain reference model: a deque of
// ids rotated by hand, a completed set, and per-task checkpoint sequences.
TEST(TaskQueueProperty, MatchesReferenceModel) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    SplitMix64 rng(seed);
    TaskQueue q;
    std::deque<std::string> order;
    std::set<std::string> done;
    std::map<std::string, std::uint64_t> seqs;
    std::set<std::string> all;
    std::size_t next_id = 0;
    std::size_t accepted = 0;

    for (int step = 0; step < 300; ++step) {
      const auto op = rng.next() % 4;
      if (op == 0) {
        const auto id = "t" + std::to_string(next_id++);
        q.enqueue(make(id));
        order.push_back(id);
        all.insert(id);
      } else if (op == 1) {
        const auto n = rng.next() % 5;
        Ids expect;
        for (std::size_t i = 0; i < std::min<std::size_t>(n, order.size()); ++i) {
          expect.push_back(order.front());
          order.push_back(order.front());
          order.pop_front();
        }
        ASSERT_EQ(ids(q.take_next(n)), expect);
      } else if (op == 2 && !all.empty()) {
        auto it = all.begin();
        std::advance(it, rng.next() % all.size());
        const auto seq = rng.next() % 6 + 1;
        auto expect = PartialStatus::Applied;
        if (done.contains(*it)) {
          expect = PartialStatus::AlreadyComplete;
        } else if (seqs.contains(*it) && seq <= seqs[*it]) {
          expect = PartialStatus::Stale;
        } else {
          seqs[*it] = seq;
        }
        ASSERT_EQ(q.apply_partial(*it, CheckpointRecord{seq, {}, seq}), expect);
      } else if (op == 3 && !all.empty()) {
        auto it = all.begin();
        std::advance(it, rng.next() % all.size());
        const auto expect = done.contains(*it) ? CompletionStatus::Duplicate : CompletionStatus::Accepted;
        if (expect == CompletionStatus::Accepted) {
          done.insert(*it);
          std::erase(order, *it);
          ++accepted;
        }
        ASSERT_EQ(q.complete(*it, {}, 1), expect);
      }
      ASSERT_EQ(q.order(), Ids(order.begin(), order.end()));
      // Conservation: every task is either queued or completed, never both.
      ASSERT_EQ(q.queued_count() + q.completed_count(), all.size());
      ASSERT_EQ(q.completed_count(), accepted);
      ASSERT_EQ(q.drained(), order.empty());
    }
  }
}

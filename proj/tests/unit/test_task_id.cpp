#include <gtest/gtest.h>

#include "liss/errors.hpp"
#include "liss/task_id.hpp"

using namespace liss;

TEST(TaskId, NamesRoundTrip) {
  for (auto t : kAllTasks) EXPECT_EQ(parse_task(task_name(t)), t);
}

TEST(TaskId, CurriculumOrderMatchesIndices) {
  for (std::size_t i = 0; i < kAllTasks.size(); ++i)
    EXPECT_EQ(static_cast<std::size_t>(kAllTasks[i]), i);
  EXPECT_EQ(kAllTasks.back(), TaskId::translation);
}

TEST(TaskId, UnknownNameIsLookupError) {
  EXPECT_THROW(parse_task("inpainting"), LookupError);
  EXPECT_THROW(parse_task_list("rotation,,bogus"), LookupError);
}

TEST(TaskId, Kinds) {
  EXPECT_TRUE(is_classification(TaskId::rotation));
  EXPECT_TRUE(is_classification(TaskId::jigsaw));
  EXPECT_FALSE(is_classification(TaskId::depth));
  EXPECT_TRUE(needs_discriminator(TaskId::colorization));
  EXPECT_TRUE(needs_discriminator(TaskId::translation));
  EXPECT_FALSE(needs_discriminator(TaskId::depth));
}

TEST(TaskId, ListRoundTrip) {
  const std::vector<TaskId> v{TaskId::jigsaw, TaskId::rotation, TaskId::translation};
  EXPECT_EQ(parse_task_list(format_task_list(v)), v);
  EXPECT_EQ(parse_task_list(" rotation , translation "),
            (std::vector<TaskId>{TaskId::rotation, TaskId::translation}));
}

TEST(TaskId, Domains) {
  EXPECT_EQ(other(Domain::A), Domain::B);
  EXPECT_EQ(other(Domain::B), Domain::A);
  EXPECT_EQ(domain_name(Domain::A), "A");
}

//! Difficulty-ordered training: emotion-wheel similarity, weighted emotional
//! shifts, conversation difficulty and the bucketed epoch scheduler.

mod difficulty;
mod schedule;
mod wheel;

pub use difficulty::{
    conversation_difficulty, conversation_difficulty_counted, dataset_difficulties,
    difficulty_report, sort_by_difficulty, weighted_shift, DifficultyCounts, DifficultyParams,
};
pub use schedule::{build_schedule, curriculum_epoch_plan, epoch_rng, shuffle_for_epoch, CurriculumSchedule};
pub use wheel::{emotion_similarity, EmotionWheel, SimilarityTable, WheelPoint};

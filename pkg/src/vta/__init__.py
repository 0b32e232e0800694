"""Virtual teaching assistant: course-grounded, student-adapted Q&A over
lecture transcripts, with a Q&A board, quizzes, and an evaluation harness."""

__version__ = "0.1.0"

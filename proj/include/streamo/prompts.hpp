#pragma once

#include <array>
#include <string_view>

namespace streamo::prompts {

// Default system prompt for streaming sessions. Shipped verbatim in
// assets/system_prompt.txt; a unit test keeps the two copies in sync.
inline constexpr std::string_view kSystemPrompt =
    R"(You are a helpful assistant specializing in streaming video analysis.
You will receive input frame by frame, each labeled with absolute time intervals
in the exact format <Xs-Ys> (e.g., <0s-1s>). Follow these rules precisely:

1. Use <Silence> when:
   - No relevant event has started, OR
   - The current input is irrelevant to the given question.

2. Use <Standby> when:
   - An event is in progress but has not yet completed, OR
   - The current input is relevant but the question cannot yet be answered.

3. Use <Response> only when:
   - An event has fully concluded, OR
   - The available information is sufficient to fully answer the question.
   Provide a complete description at this point.

Do not provide partial answers or speculate beyond the given information.
Whenever you deliver an answer, begin with <Response>.
)";

// Instruction template families, one per streaming task. Grounding templates
// carry a {caption} slot, TSQA templates a {question} slot.
inline constexpr std::array<std::string_view, 5> kNarrationTemplates = {
    "Provide a continuous, time-synchronized narration of the video, "
    "describing actions, objects, and scene changes as they occur.",
    "Narrate the video in real time, updating the description frame-by-frame "
    "or moment-by-moment as events unfold.",
    "Generate live commentary of the video, focusing on who is doing what, "
    "where, and when, and noting any transitions or new events immediately.",
    "Deliver an on-the-fly description of the video, highlighting salient "
    "actions, interactions, and changes in context as soon as they appear.",
    "Produce a running narration that captures ongoing activities, brief "
    "pauses, and resumptions, maintaining temporal alignment with the video "
    "timeline.",
};

inline constexpr std::array<std::string_view, 5> kActionCaptionTemplates = {
    "Find, identify, and determine the temporal boundaries of a series of "
    "distinct actions or steps occurring throughout the video.",
    "Locate and describe a series of actions or steps in the video.",
    "Locate and pinpoint a sequential series of specific actions or steps in "
    "the video.",
    "Identify and mark the video segments corresponding to a series of "
    "actions or steps.",
    "Identify and localize a series of steps or actions occurring in the "
    "video.",
};

inline constexpr std::array<std::string_view, 5> kEventCaptionTemplates = {
    "Identify and describe all events in the following video.",
    "List every event happening in the following video with descriptions.",
    "Detect and summarize each event sequence in the following video.",
    "Extract and explain all notable events in the following video.",
    "Find all significant events in the following video and describe them.",
};

inline constexpr std::array<std::string_view, 5> kEventGroundingTemplates = {
    "Watch the following video and temporally localize the event. Respond "
    "once it has finished and summarize its time period. The given event is: "
    "'{caption}'",
    "Monitor the following video, identify the event, then respond after it "
    "finishes with a summary of its time window. The given event is: "
    "'{caption}'",
    "Analyze the following video, detect the event and report back upon its "
    "completion with its time period. The given event is: '{caption}'",
    "Review the following video, localize the event in time, then notify me "
    "once it ends and summarize the interval it occupies. The given event "
    "is: '{caption}'",
    "Identify and temporally segment the event in the following video. "
    "Report after it finishes with its time period and duration. The given "
    "event is: '{caption}'",
};

inline constexpr std::array<std::string_view, 5> kTsqaTemplates = {
    "{question} If the answer changes over time, update your response "
    "accordingly.",
    "{question} Update your answer if it becomes different at a later time.",
    "{question} If it later differs, update your response promptly.",
    "{question} Refresh your answer upon any change.",
    "{question} If the correct answer later changes, update your response.",
};

// Pairwise preference template for the judge client. Slots: {task}, {output_a},
// {output_b}. The verdict grammar accepts exactly A, B, or TIE.
inline constexpr std::string_view kPairwiseJudgeTemplate =
    R"(You are comparing two assistant outputs for the same streaming video task.

Task: {task}

Output A:
{output_a}

Output B:
{output_b}

Which output fulfils the task better? Consider correctness, completeness, and
faithfulness to the task. Answer with exactly one token: A, B, or TIE.
)";

// Yes/no content-equivalence template. Slots: {prediction}, {reference}.
inline constexpr std::string_view kContentMatchJudgeTemplate =
    R"(Decide whether the predicted answer conveys the same content as the
reference answer.

Prediction: {prediction}
Reference: {reference}

Answer with exactly one token: YES or NO.
)";

// Annotation-stage templates. The client can drive a real annotation run with
// these; nothing in the test suite executes them against a live service.

// Slot: {clip_description_list}.
inline constexpr std::string_view kAnnotationDescriptionTemplate =
    R"(You receive a list of short clip-level observations from one video,
each tagged with its time interval. Write one factual description per clip,
keeping the time tags and mentioning only what is visible.

Clips:
{clip_description_list}
)";

// Slots: {previous_narration}, {current_description}.
inline constexpr std::string_view kAnnotationNarrationMergeTemplate =
    R"(Merge the running narration with the newest clip description into a
single coherent narration. Never contradict earlier statements; append new
information in chronological order and drop exact repetitions.

Narration so far:
{previous_narration}

New description:
{current_description}
)";

// Slot: {narration}.
inline constexpr std::string_view kAnnotationRecapTemplate =
    R"(Condense the narration below into a recap of the key events, one line
per event, each line starting with the event's time interval.

Narration:
{narration}
)";

// Slot: {narration}. Answers must change over time for a question to qualify.
inline constexpr std::string_view kAnnotationTsqaTemplate =
    R"(From the narration below, write time-sensitive question/answer pairs.
Each question must have at least 2 distinct answers that hold over different,
non-overlapping time spans, and every answer must carry the time at which it
becomes correct. Output one JSON object per line:
{"question": ..., "answers": [{"value": ..., "time": ...}, ...]}

Narration:
{narration}
)";

}  // namespace streamo::prompts

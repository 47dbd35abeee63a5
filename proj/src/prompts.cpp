#include "aclear/judge.hpp"

namespace aclear {

namespace {

constexpr const char* kStepPrompt = R"(You are an expert reviewer of AI agent executions. Evaluate ONE step of an agent trace: a single LLM call made by one component of the agent.

## Task given to the agent
{task}

## Earlier steps
{trace}

## Step input
{input}

## Step output
{output}

Assess the step output on these dimensions: {dimensions}.
Look for concrete problems: wrong or unsupported content, ignored instructions, malformed output, wasted or redundant actions, unclear communication. Judge the step on its own role; do not penalize it for work that belongs to later steps.

Answer in exactly this format, with the justification before the score:
Dimensions:
- <dimension name>: <integer 1-10>
Justification: <two to four sentences naming the specific problems, or why the step is sound>
Score: <integer 1-10 for the overall quality of this step>
)";

constexpr const char* kTracePrompt = R"(You are an expert reviewer of AI agent executions. Evaluate the COMPLETE execution trace below: every LLM call the agent made while working on the task.

## Task given to the agent
{task}

## Execution trace
{trace}

Assess the whole execution on these dimensions: {dimensions}.
Consider whether the steps fit together, whether errors were noticed and recovered from, whether effort was wasted, and whether the final deliverable actually accomplishes the task.

Answer in exactly this format, with the justification before the score:
Dimensions:
- <dimension name>: <integer 1-10>
Justification: <three to five sentences naming the specific problems, or why the execution succeeded>
Score: <integer 1-10 for the overall quality of the execution>
)";

constexpr const char* kRubricGenPrompt = R"(You are designing evaluation criteria for a task given to an AI agent. Read the task and decide how many criteria it needs (at least 1, at most 12). Each criterion must describe something the agent has to do or produce to accomplish the task, and must be checkable on its own against a record of the agent's actions.

## Task
{task}

Answer with a numbered list, one criterion per line, and nothing else:
1. <criterion>
2. <criterion>
)";

constexpr const char* kRubricVerifyPrompt = R"(You are checking whether an AI agent's execution satisfied a list of criteria for its task.

## Task given to the agent
{task}

## Execution trace
{trace}

## Criteria
{rubrics}

For every criterion decide whether the trace shows it was met. Answer with one block per criterion, in this exact format:
[R1]
Reasoning: <one or two sentences citing the evidence; write them so they make sense without the criteria list>
Verdict: YES or NO
)";

}  // namespace

PromptSet PromptSet::defaults() { return PromptSet{kStepPrompt, kTracePrompt, kRubricGenPrompt, kRubricVerifyPrompt}; }

}  // namespace aclear

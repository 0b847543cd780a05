"""Prompt templates and placeholder rendering.

Placeholders are written ``{Name}`` and may contain spaces. Rendering is
exact substitution: no escaping, no recursion, and every placeholder in the
body must be bound.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import MissingPlaceholder


class TemplateName(str, Enum):
    REFORMULATE = "Reformulate"
    RELEVANCE = "Relevance"
    GENERATE = "Generate"
    ATOMIC_SPLIT = "AtomicSplit"
    VERIFY = "Verify"


REFORMULATE_BODY = """\
You are tasked with resolving all pronouns and references in the given dialogue to their explicit entities. Use CoT (Chain of Thought) reasoning to identify what each pronoun or reference corresponds to. Do not answer any questions; your only goal is to perform co-reference resolution.

Instructions:

1. Analyze the dialogue and process each turn in the conversation.

2. For every pronoun, ambiguous term, or reference, trace back in the conversation to determine its explicit entity or subject.

3. Clearly document your CoT reasoning for each resolution.

4. Provide the explicit reference for each pronoun or ambiguous term.

Output Format:

**Chain of Thought**: [Your reasoning process for resolving the references]

**Resolved Dialogue**: [The dialogue with all pronouns and references resolved]
Dialogue: {Dialogue}"""

GENERATE_BODY = """\
Knowledge: {Selected Triples}
Dialogue: {Dialogue Context}
Given the above knowledge and dialogue, please respond to the input below and ensure the response is fluent and fact-consistent in English.
Input: {Last Utterance}
Response: ..."""

ATOMIC_SPLIT_BODY = """\
If the following input is an incomplete sentence or a phrase, please output it exactly as it is.
Otherwise, if it is a complete sentence, split it into atomic sentences based only on the given information, without adding any additional information or making inferences:
Input: {Response}
Output ...:"""

VERIFY_BODY = """\
Instruction:
The statement is part of a response in a dialogue. Evaluate the statement strictly based on the provided knowledge source and dialogue history only.
If the statement is not a factual claim (e.g., opinion, question, or unclear assertion), output: "no enough information."

If it is a factual claim:
Output true if the statement is directly supported by evidence in the knowledge source or dialogue history.
Output false if the statement is directly contradicted by the knowledge source or dialogue history.
Output no enough information if there is no direct evidence for or against the statement.

Important:
Do not use your intern knowledge or make inferences.
Please only output your final answer and do not output any explanations.

Evidence: {Wikipedia Passages}
Dialogue history: {Dialogue}
Speaker A: {Speaker}
Statement: {Atomic Fact}"""

# No published body exists for the relevance judgement (the original selector is
# a trained classifier); this zero-shot substitute keeps the Relevant/Irrelevant
# label convention.
RELEVANCE_BODY = """\
Given the dialogue, decide whether the knowledge triple is relevant to the dialogue. Output Relevant or Irrelevant, and nothing else.
Dialogue: {Dialogue}
Triple: {Selected Triples}"""


@dataclass(frozen=True)
class PromptTemplate:
    name: TemplateName
    body: str

    def placeholders(self) -> list[str]:
        return re.findall(r"\{([^{}]+)\}", self.body)

    def render(self, bindings: dict[str, str]) -> str:
        """Substitute every placeholder; raise MissingPlaceholder otherwise."""

        def repl(m: re.Match) -> str:
            name = m.group(1)
            if name not in bindings:
                raise MissingPlaceholder(name)
            return bindings[name]

        return re.sub(r"\{([^{}]+)\}", repl, self.body)


TEMPLATES: dict[TemplateName, PromptTemplate] = {
    TemplateName.REFORMULATE: PromptTemplate(TemplateName.REFORMULATE, REFORMULATE_BODY),
    TemplateName.RELEVANCE: PromptTemplate(TemplateName.RELEVANCE, RELEVANCE_BODY),
    TemplateName.GENERATE: PromptTemplate(TemplateName.GENERATE, GENERATE_BODY),
    TemplateName.ATOMIC_SPLIT: PromptTemplate(TemplateName.ATOMIC_SPLIT, ATOMIC_SPLIT_BODY),
    TemplateName.VERIFY: PromptTemplate(TemplateName.VERIFY, VERIFY_BODY),
}


def render(name: TemplateName, bindings: dict[str, str]) -> str:
    return TEMPLATES[name].render(bindings)

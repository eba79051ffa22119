"""Few-shot template baselines: plain prompting and self-refinement.

A template is plain text with exactly one [[EXAMPLE]] placeholder. The
plain-template path (PT) renders a seed example into the question template,
samples a continuation at its own default temperature, and splits it into
up to ten candidates at "Question <n>:" / "Passage and Question <n>:"
markers. The self-refinement path (PT_SR) then alternates critique and
refine rounds per candidate, accepting as soon as a refine output begins
with the stop token after whitespace trimming.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .backbone import BackboneModel, continue_tokens
from .errors import ValidationError
from .generation import record_stream
from .records import SyntheticRecord

PLACEHOLDER = "[[EXAMPLE]]"

_MARKER_RE = re.compile(r"(?:Passage and )?Question\s*\d+\s*:")
_MAX_SPLIT = 10

_CRITIQUE_PHASE, _REFINE_PHASE = 11, 12


@dataclass
class PromptTemplate:
    body: str
    kind: str            # "question" | "answer" | "critique" | "refine"
    domain_tag: str = ""

    def __post_init__(self):
        if not self.body:
            raise ValidationError("template body must be nonempty")
        n = self.body.count(PLACEHOLDER)
        if n != 1:
            raise ValidationError(f"template must contain exactly one placeholder, found {n}")


def render(template: PromptTemplate, example_text: str) -> str:
    """Substitute the example into the placeholder slot."""
    n = template.body.count(PLACEHOLDER)
    if n != 1:
        raise ValidationError(f"template must contain exactly one placeholder, found {n}")
    return template.body.replace(PLACEHOLDER, example_text)


def load_builtin_templates(domain: str) -> dict[str, PromptTemplate]:
    """Template fixtures shipped with the package, keyed by kind.

    Kinds: question, question_undiversified, answer, critique, refine.
    """
    base = resources.files("softsrv") / "templates"
    out = {}
    for kind in ("question", "question_undiversified", "answer", "critique", "refine"):
        name = f"{domain}_{kind}.txt"
        path = base / name
        try:
            body = path.read_text(encoding="utf-8")
        except FileNotFoundError:
            raise ValidationError(f"no builtin template {name!r}") from None
        tpl_kind = "question" if kind == "question_undiversified" else kind
        out[kind] = PromptTemplate(body=body.strip("\n"), kind=tpl_kind, domain_tag=domain)
    return out


def split_questions(text: str) -> list[str]:
    """Split a sampled continuation at enumeration markers, max ten candidates.

    With no marker present the whole continuation is the single candidate.
    """
    parts = [p.strip() for p in _MARKER_RE.split(text)]
    parts = [p for p in parts if p]
    if not parts:
        return []
    return parts[:_MAX_SPLIT]


@dataclass
class RefineConfig:
    max_rounds: int = 3
    stop_token_text: str = "Stop"

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")
        if not self.stop_token_text:
            raise ValidationError("stop_token_text must be nonempty")


def _continuation_text(model: BackboneModel, prompt_text: str, max_new: int, temperature: float, stream) -> str:
    ids = model.vocab.encode(prompt_text)
    return model.vocab.decode(continue_tokens(model, ids, max_new, temperature, stream))


def pt_generate(
    backbone: BackboneModel,
    templates: dict[str, PromptTemplate],
    seeds: list[str],
    n_raw: int,
    temperature: float = 2.0,
    seed: int = 0,
    max_new: int = 96,
    template_key: str = "question",
    method_tag: str = "PT",
) -> list[SyntheticRecord]:
    """Render/sample/split until n_raw question records exist."""
    if not seeds:
        raise ValidationError("no seed examples")
    if n_raw < 1:
        raise ValidationError("n_raw must be >= 1")
    if template_key not in templates:
        raise ValidationError(f"missing template {template_key!r}")
    tpl = templates[template_key]
    records: list[SyntheticRecord] = []
    visit = 0
    while len(records) < n_raw:
        si = visit % len(seeds)
        prompt_text = render(tpl, seeds[si])
        text = _continuation_text(
            backbone, prompt_text, max_new, temperature, record_stream(seed, method_tag, visit)
        )
        candidates = split_questions(text) or ["<unk>"]
        for part in candidates:
            if len(records) == n_raw:
                break
            records.append(
                SyntheticRecord(
                    question=part,
                    seed_index=si,
                    method_tag=method_tag,
                    provenance={
                        "master_seed": int(seed),
                        "visit": visit,
                        "temperature": temperature,
                    },
                )
            )
        visit += 1
    return records


def ptsr_generate(
    backbone: BackboneModel,
    templates: dict[str, PromptTemplate],
    seeds: list[str],
    n_raw: int,
    cfg: RefineConfig | None = None,
    temperature: float = 2.0,
    seed: int = 0,
    max_new: int = 96,
) -> list[SyntheticRecord]:
    """PT candidates followed by critique/refine rounds per candidate."""
    cfg = cfg or RefineConfig()
    for key in ("critique", "refine"):
        if key not in templates:
            raise ValidationError(f"missing template {key!r}")
    base = pt_generate(
        backbone, templates, seeds, n_raw,
        temperature=temperature, seed=seed, max_new=max_new, method_tag="PT_SR",
    )
    out = []
    for idx, rec in enumerate(base):
        question = rec.question
        rounds_used = 0
        accepted = False
        for rnd in range(cfg.max_rounds):
            rounds_used = rnd + 1
            critique = _continuation_text(
                backbone,
                render(templates["critique"], question),
                max_new, temperature,
                record_stream(seed, "PT_SR", idx, rnd, _CRITIQUE_PHASE),
            )
            composite = f"{question}\nCritique: {critique}"
            refined = _continuation_text(
                backbone,
                render(templates["refine"], composite),
                max_new, temperature,
                record_stream(seed, "PT_SR", idx, rnd, _REFINE_PHASE),
            ).strip()
            if refined.startswith(cfg.stop_token_text):
                accepted = True
                break
            if refined:  # an empty rewrite keeps the previous question
                question = refined
        prov = dict(rec.provenance)
        prov.update({"rounds": rounds_used, "accepted": accepted})
        out.append(
            SyntheticRecord(
                question=question,
                seed_index=rec.seed_index,
                method_tag="PT_SR",
                provenance=prov,
            )
        )
    return out


def pt_generate_answers(
    backbone: BackboneModel,
    templates: dict[str, PromptTemplate],
    records: list[SyntheticRecord],
    temperature: float = 2.0,
    seed: int = 0,
    max_new: int = 64,
) -> list[SyntheticRecord]:
    """Answers via the answer template rendered around each question."""
    if "answer" not in templates:
        raise ValidationError("missing template 'answer'")
    out = []
    for j, rec in enumerate(records):
        text = _continuation_text(
            backbone,
            render(templates["answer"], rec.question),
            max_new, temperature,
            record_stream(seed, rec.method_tag, j, 98),
        )
        prov = dict(rec.provenance)
        prov["answer_seed"] = int(seed)
        prov["answer_temperature"] = temperature
        out.append(
            SyntheticRecord(
                question=rec.question,
                answer=text,
                seed_index=rec.seed_index,
                method_tag=rec.method_tag,
                provenance=prov,
            )
        )
    return out


def load_template_file(path: str | Path, kind: str, domain_tag: str = "") -> PromptTemplate:
    return PromptTemplate(body=Path(path).read_text(encoding="utf-8").strip("\n"),
                          kind=kind, domain_tag=domain_tag)

"""Staged experiment runner with artifact-based resume.

Stages run in a fixed order, each writing its artifacts into the run
directory. A stage whose artifacts already exist is loaded instead of
recomputed, so interrupting and rerunning a run directory picks up where
it stopped. Every stage is seeded from the config, artifacts serialize
deterministically, and summary.txt excludes wall-clock, so two runs of
the same config produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import vocab as V
from .backbone import (
    BackboneConfig,
    BackboneModel,
    load_backbone,
    pretrain_backbone,
    save_backbone,
)
from .config import ExperimentConfig, VARIANTS, save_config, to_ini_text
from .embedder import embed_sequence
from .errors import StageError, ValidationError
from .generation import generate_answers, generate_questions
from .mauve import mauve_score
from .optim import LossTrace
from .postprocess import decontaminate_report, diverse_subsample
from .prompts import init_params
from .records import SyntheticRecord, read_records, write_records
from .student import evaluate_student
from .templates import RefineConfig, load_builtin_templates, pt_generate, pt_generate_answers, ptsr_generate
from .toygrammar import CorpusExample, builtin_grammar, generic_corpus, make_toy_corpus
from .training import TrainConfig, load_params, save_params, train
from .vocab import Vocabulary, build_vocab

STAGES = (
    "corpus", "backbone", "embedder", "train", "generate",
    "answers", "postprocess", "mauve", "student", "summary",
)

# exit codes 10.. keep stage failures distinguishable from argparse (2)
STAGE_EXIT_CODES = {name: 10 + i for i, name in enumerate(STAGES)}


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _trace_text(trace: LossTrace) -> str:
    lines = ["step\tloss"]
    for i, loss in enumerate(trace.losses):
        lines.append(f"{i}\t{loss:.10g}")
    return "\n".join(lines) + "\n"


def _read_trace_losses(path: Path) -> list[float]:
    lines = path.read_text(encoding="utf-8").splitlines()
    return [float(line.split("\t")[1]) for line in lines[1:]]


def _qa_text(ex: CorpusExample) -> str:
    return ex.question + " " + ex.answer


class Pipeline:
    """One run directory; methods materialize stages on demand."""

    def __init__(self, cfg: ExperimentConfig, out_dir: str | Path | None = None):
        self.cfg = cfg.validate()
        self.out = Path(out_dir if out_dir is not None else cfg.paths.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        save_config(self.out / "config.ini", cfg)
        self._corpus: dict | None = None
        self._vocab: Vocabulary | None = None
        self._backbone: BackboneModel | None = None
        self._embedder: BackboneModel | None = None
        self._student_base: BackboneModel | None = None
        self._params = None

    def _stage(self, name: str, fn):
        try:
            return fn()
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc

    # ------------------------------------------------------------------
    # corpus

    def ensure_corpus(self) -> dict:
        return self._stage("corpus", self._corpus_impl)

    def _corpus_impl(self) -> dict:
        if self._corpus is not None:
            return self._corpus
        path = self.out / "corpus.json"
        if path.exists():
            raw = json.loads(path.read_text(encoding="utf-8"))
            self._corpus = {
                "grammar": raw["grammar"],
                "train": [CorpusExample(**d) for d in raw["train"]],
                "test": [CorpusExample(**d) for d in raw["test"]],
                "aux": [CorpusExample(**d) for d in raw["aux"]],
                "generic": list(raw["generic"]),
            }
            return self._corpus
        c = self.cfg.corpus
        grammar = builtin_grammar(c.grammar)
        train_fold, test_fold = make_toy_corpus(grammar, c.n_examples, self.cfg.seeds.corpus)
        other_id = "truefalse" if c.grammar == "arithmetic" else "arithmetic"
        aux_fold, _ = make_toy_corpus(builtin_grammar(other_id), c.n_aux, self.cfg.seeds.corpus + 1)
        generic = generic_corpus(c.n_generic, self.cfg.seeds.corpus + 2)
        self._corpus = {
            "grammar": c.grammar,
            "train": train_fold,
            "test": test_fold,
            "aux": aux_fold,
            "generic": generic,
        }
        payload = {
            "grammar": c.grammar,
            "train": [{"question": e.question, "answer": e.answer} for e in train_fold],
            "test": [{"question": e.question, "answer": e.answer} for e in test_fold],
            "aux": [{"question": e.question, "answer": e.answer} for e in aux_fold],
            "generic": generic,
        }
        _write_text(path, json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")
        return self._corpus

    def vocabulary(self) -> Vocabulary:
        if self._vocab is not None:
            return self._vocab
        if self._backbone is not None:
            self._vocab = self._backbone.vocab
            return self._vocab
        data = self.ensure_corpus()
        texts = []
        for fold in ("train", "test", "aux"):
            for ex in data[fold]:
                texts.append(ex.question)
                texts.append(ex.answer)
        texts.extend(data["generic"])
        for tpl in load_builtin_templates(data["grammar"]).values():
            texts.append(tpl.body)
        self._vocab = build_vocab(texts, max_size=self.cfg.backbone.vocab_size)
        return self._vocab

    def _pretrain_sequences(self, vocabulary: Vocabulary) -> list[list[int]]:
        data = self.ensure_corpus()
        seqs = [vocabulary.encode(_qa_text(ex)) for ex in data["train"]]
        seqs += [vocabulary.encode(ex.question) for ex in data["train"]]
        seqs += [vocabulary.encode(_qa_text(ex)) for ex in data["aux"]]
        seqs += [vocabulary.encode(s) for s in data["generic"]]
        return seqs

    # ------------------------------------------------------------------
    # frozen models

    def ensure_backbone(self) -> BackboneModel:
        return self._stage("backbone", self._backbone_impl)

    def _backbone_impl(self) -> BackboneModel:
        if self._backbone is not None:
            return self._backbone
        path = self.out / "backbone.ckpt"
        if path.exists():
            self._backbone = load_backbone(path)
            return self._backbone
        b = self.cfg.backbone
        vocabulary = self.vocabulary()
        config = BackboneConfig(
            d=b.d, n_layers=b.n_layers, n_heads=b.n_heads,
            ffn_dim=b.ffn_dim, max_seq=b.max_seq, dtype=b.dtype,
        )
        model, trace = pretrain_backbone(
            self._pretrain_sequences(vocabulary), vocabulary, config,
            steps=b.pretrain_steps, lr=b.pretrain_lr,
            seed=self.cfg.seeds.backbone, batch_size=b.pretrain_batch,
        )
        save_backbone(path, model)
        _write_text(self.out / "backbone_trace.tsv", _trace_text(trace))
        self._backbone = model
        return model

    def ensure_embedder(self) -> BackboneModel:
        return self._stage("embedder", self._embedder_impl)

    def _embedder_impl(self) -> BackboneModel:
        if self._embedder is not None:
            return self._embedder
        path = self.out / "embedder.ckpt"
        if path.exists():
            self._embedder = load_backbone(path)
            return self._embedder
        e = self.cfg.embedder
        if e.d_e > e.d:
            raise ValidationError("embedder.d_e cannot exceed embedder.d")
        vocabulary = self.vocabulary()
        config = BackboneConfig(
            d=e.d, n_layers=e.n_layers, n_heads=e.n_heads,
            ffn_dim=e.ffn_dim, max_seq=self.cfg.backbone.max_seq,
        )
        model, trace = pretrain_backbone(
            self._pretrain_sequences(vocabulary), vocabulary, config,
            steps=e.pretrain_steps, lr=e.pretrain_lr,
            seed=self.cfg.seeds.embedder, batch_size=e.pretrain_batch,
        )
        save_backbone(path, model)
        _write_text(self.out / "embedder_trace.tsv", _trace_text(trace))
        self._embedder = model
        return model

    def ensure_student_base(self) -> BackboneModel:
        return self._stage("student", self._student_base_impl)

    def _student_base_impl(self) -> BackboneModel:
        if self._student_base is not None:
            return self._student_base
        path = self.out / "student_base.ckpt"
        if path.exists():
            self._student_base = load_backbone(path)
            return self._student_base
        s = self.cfg.student
        data = self.ensure_corpus()
        vocabulary = self.vocabulary()
        config = BackboneConfig(
            d=s.d, n_layers=s.n_layers, n_heads=s.n_heads,
            ffn_dim=s.ffn_dim, max_seq=self.cfg.backbone.max_seq,
        )
        # the proxy student never sees either grammar before fine-tuning
        model, trace = pretrain_backbone(
            [vocabulary.encode(t) for t in data["generic"]], vocabulary, config,
            steps=s.pretrain_steps, lr=s.pretrain_lr,
            seed=self.cfg.seeds.student, batch_size=s.pretrain_batch,
        )
        save_backbone(path, model)
        _write_text(self.out / "student_base_trace.tsv", _trace_text(trace))
        self._student_base = model
        return model

    # ------------------------------------------------------------------
    # soft-prompt training

    def ensure_params(self):
        return self._stage("train", self._params_impl)

    def _params_impl(self):
        method = self.cfg.generation.method
        if method not in VARIANTS:
            raise ValidationError(f"method {method!r} does not train soft prompts")
        if self._params is not None:
            return self._params
        backbone = self.ensure_backbone()
        path = self.out / "params.ckpt"
        if path.exists():
            self._params, _ = load_params(path, backbone)
            return self._params
        s = self.cfg.softsrv
        tr = self.cfg.trainer
        embedder = self.ensure_embedder() if method != "ss_np" else None
        data = self.ensure_corpus()
        vocabulary = self.vocabulary()
        params = init_params(
            method, backbone, t=s.t, d_e=self.cfg.embedder.d_e,
            seed=self.cfg.seeds.train, k=s.k,
            mlp_hidden=s.mlp_hidden, mlp_layers=s.mlp_layers,
        )
        dataset = [vocabulary.encode(ex.question) for ex in data["train"]]
        cfg = TrainConfig(
            steps=tr.steps, lr=tr.lr, batch_size=tr.batch_size,
            betas=(tr.beta1, tr.beta2), eps=tr.eps,
            grad_clip=tr.grad_clip, seed=self.cfg.seeds.train,
        )
        trained, trace = train(backbone, embedder, dataset, params, cfg)
        save_params(path, trained)
        _write_text(self.out / "train_trace.tsv", _trace_text(trace))
        self._params = trained
        return trained

    # ------------------------------------------------------------------
    # synthesis

    def ensure_questions(self) -> list[SyntheticRecord]:
        return self._stage("generate", self._questions_impl)

    def _questions_impl(self) -> list[SyntheticRecord]:
        path = self.out / "questions.jsonl"
        if path.exists():
            return read_records(path)
        g = self.cfg.generation
        backbone = self.ensure_backbone()
        data = self.ensure_corpus()
        vocabulary = self.vocabulary()
        if g.method in VARIANTS:
            params = self.ensure_params()
            embedder = self.ensure_embedder() if g.method != "ss_np" else None
            seeds = [vocabulary.encode(ex.question) for ex in data["train"]]
            records = generate_questions(
                backbone, embedder, params, seeds, g.n_raw,
                temperature=g.question_temperature,
                seed=self.cfg.seeds.generate, max_len=g.max_new_tokens,
            )
        else:
            templates = load_builtin_templates(data["grammar"])
            seeds = [ex.question for ex in data["train"]]
            key = "question" if g.pt_template == "diversified" else "question_undiversified"
            if g.method == "pt":
                records = pt_generate(
                    backbone, templates, seeds, g.n_raw,
                    temperature=g.pt_temperature, seed=self.cfg.seeds.generate,
                    max_new=g.max_new_tokens, template_key=key,
                )
            else:
                records = ptsr_generate(
                    backbone, templates, seeds, g.n_raw,
                    cfg=RefineConfig(max_rounds=g.ptsr_max_rounds, stop_token_text=g.ptsr_stop_text),
                    temperature=g.pt_temperature, seed=self.cfg.seeds.generate,
                    max_new=g.max_new_tokens,
                )
        write_records(path, records)
        return records

    def ensure_answers(self) -> list[SyntheticRecord]:
        return self._stage("answers", self._answers_impl)

    def _answers_impl(self) -> list[SyntheticRecord]:
        path = self.out / "answered.jsonl"
        if path.exists():
            return read_records(path)
        g = self.cfg.generation
        backbone = self.ensure_backbone()
        questions = self.ensure_questions()
        if g.method in VARIANTS:
            records = generate_answers(
                backbone, questions,
                temperature=g.answer_temperature,
                seed=self.cfg.seeds.answers, max_new=g.max_new_tokens,
            )
        else:
            templates = load_builtin_templates(self.ensure_corpus()["grammar"])
            records = pt_generate_answers(
                backbone, templates, questions,
                temperature=g.answer_temperature,
                seed=self.cfg.seeds.answers, max_new=g.max_new_tokens,
            )
        write_records(path, records)
        return records

    # ------------------------------------------------------------------
    # postprocess

    def ensure_postprocess(self) -> list[SyntheticRecord]:
        return self._stage("postprocess", self._postprocess_impl)

    def _postprocess_impl(self) -> list[SyntheticRecord]:
        final_path = self.out / "final.jsonl"
        if final_path.exists():
            return read_records(final_path)
        p = self.cfg.postprocess
        answered = self.ensure_answers()
        data = self.ensure_corpus()

        picked = diverse_subsample(
            [r.question for r in answered], p.n_select,
            svd_dims=p.svd_dims, k=p.kmeans_k, batch_size=p.kmeans_batch,
            iterations=p.kmeans_iterations, seed=self.cfg.seeds.postprocess,
        )
        selected = [answered[i] for i in picked]
        write_records(self.out / "selected.jsonl", selected)

        candidates = [
            r.question if r.answer is None else r.question + " " + r.answer
            for r in selected
        ]
        reference = [_qa_text(ex) for ex in data["test"]]
        kept_idx, removed = decontaminate_report(candidates, reference, n=p.decontam_n)
        final = [selected[i] for i in kept_idx]
        audited = []
        for i, gram in removed:
            rec = selected[i]
            prov = dict(rec.provenance)
            prov["matched_ngram"] = list(gram)
            audited.append(
                SyntheticRecord(
                    question=rec.question, answer=rec.answer,
                    seed_index=rec.seed_index, method_tag=rec.method_tag,
                    provenance=prov,
                )
            )
        write_records(self.out / "contaminated.jsonl", audited)
        write_records(final_path, final)
        return final

    # ------------------------------------------------------------------
    # evaluation

    def ensure_mauve(self) -> float:
        return self._stage("mauve", self._mauve_impl)

    def _mauve_impl(self) -> float:
        path = self.out / "mauve_report.txt"
        if path.exists():
            first = path.read_text(encoding="utf-8").splitlines()[0]
            return float(first.split("\t")[1])
        m = self.cfg.mauve
        final = self.ensure_postprocess()
        if not final:
            raise ValidationError("no synthetic records survived postprocessing")
        data = self.ensure_corpus()
        embedder = self.ensure_embedder()
        vocabulary = self.vocabulary()
        d_e = self.cfg.embedder.d_e

        def cloud(texts: list[str]) -> np.ndarray:
            return np.stack([embed_sequence(embedder, vocabulary.encode(t), d_e) for t in texts])

        report = mauve_score(
            cloud([r.question for r in final]),
            cloud([ex.question for ex in data["test"]]),
            k=m.k, c=m.c, grid_size=m.grid_size, seed=self.cfg.seeds.mauve,
        )
        _write_text(path, report.to_text())
        return report.score

    def ensure_student(self) -> dict:
        return self._stage("student", self._student_impl)

    def _student_impl(self) -> dict:
        path = self.out / "student_report.txt"
        if path.exists():
            fields = dict(
                line.split("\t") for line in path.read_text(encoding="utf-8").splitlines() if line
            )
            return {
                "base_ppl": float(fields["base_ppl"]),
                "tuned_ppl": float(fields["tuned_ppl"]),
                "ratio": float(fields["ratio"]),
            }
        s = self.cfg.student
        base = self.ensure_student_base()
        final = self.ensure_postprocess()
        if not final:
            raise ValidationError("no synthetic records survived postprocessing")
        data = self.ensure_corpus()
        vocabulary = self.vocabulary()
        test_fold = [vocabulary.encode(_qa_text(ex)) for ex in data["test"]]
        report = evaluate_student(
            base, final, test_fold, vocabulary,
            dataset_tag=data["grammar"],
            steps=s.finetune_steps, lr=s.finetune_lr,
            batch_size=s.finetune_batch, seed=self.cfg.seeds.student,
        )
        _write_text(path, report.to_text())
        return {"base_ppl": report.base_ppl, "tuned_ppl": report.tuned_ppl, "ratio": report.ratio}

    # ------------------------------------------------------------------
    # summary

    def run_all(self) -> str:
        return self._stage("summary", self._summary_impl)

    def _summary_impl(self) -> str:
        path = self.out / "summary.txt"
        if path.exists():
            return path.read_text(encoding="utf-8")
        data = self.ensure_corpus()
        self.ensure_backbone()
        if self.cfg.generation.method in VARIANTS:
            self.ensure_embedder()
            self.ensure_params()
        questions = self.ensure_questions()
        answered = self.ensure_answers()
        final = self.ensure_postprocess()
        selected = read_records(self.out / "selected.jsonl")
        mauve = self.ensure_mauve()
        student = self.ensure_student()

        lines = ["experiment summary", "=" * 18, ""]
        lines.append(f"method\t{self.cfg.generation.method}")
        lines.append(f"grammar\t{data['grammar']}")
        lines.append(f"train_examples\t{len(data['train'])}")
        lines.append(f"test_examples\t{len(data['test'])}")
        if self.cfg.generation.method in VARIANTS:
            losses = _read_trace_losses(self.out / "train_trace.tsv")
            head = np.mean(losses[:100]) if losses else float("nan")
            tail = np.mean(losses[-100:]) if losses else float("nan")
            lines.append(f"train_loss_first100\t{head:.10g}")
            lines.append(f"train_loss_last100\t{tail:.10g}")
        lines.append(f"questions_raw\t{len(questions)}")
        lines.append(f"questions_answered\t{len(answered)}")
        lines.append(f"selected\t{len(selected)}")
        lines.append(f"contaminated_removed\t{len(selected) - len(final)}")
        lines.append(f"final_records\t{len(final)}")
        lines.append(f"mauve_score\t{mauve:.10g}")
        lines.append(f"student_base_ppl\t{student['base_ppl']:.10g}")
        lines.append(f"student_tuned_ppl\t{student['tuned_ppl']:.10g}")
        lines.append(f"student_ppl_ratio\t{student['ratio']:.10g}")
        lines.append(f"student_success\t{student['ratio'] <= 0.8}")
        lines.append("")
        lines.append("resolved config")
        lines.append("-" * 15)
        lines.append(to_ini_text(self.cfg))
        text = "\n".join(lines)
        _write_text(path, text)
        return text


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> str:
    """Run every stage and return the summary text."""
    return Pipeline(cfg, out_dir).run_all()

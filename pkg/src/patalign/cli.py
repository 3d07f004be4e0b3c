"""Command-line interface: align, learn, reason, and score workflows.

Exit codes are a stable contract: 0 success, 1 input error, 2 empty
result.  All commands are deterministic given identical flags; --seed is
accepted for randomized tooling built on top but the engine itself does
not draw random numbers.
"""

from __future__ import annotations

import pathlib
import sys

import click

from .alignment import (
    BuildConfig,
    alignment_probabilities,
    audit_trail,
    build_alignments,
    derive_code_pattern,
    extract_inferences,
    render_alignment,
    score_alignment,
)
from .coding import entropy as entropy_fn
from .coding import redundancy as redundancy_fn
from .coding import search_space_stats
from .core import Corpus, FormatError, Role, SPPattern, parse_pattern_file, serialize_pattern_file
from .learning import LearnConfig, learn_grammars, score_grammar

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_EMPTY = 2


def _parse_id_marks(text: str) -> frozenset[str]:
    return frozenset(m for m in text.replace(",", " ").split() if m)


def _load_patterns(path: str, role: Role, id_marks: frozenset[str]) -> list[SPPattern]:
    text = pathlib.Path(path).read_text(encoding="utf-8")
    return parse_pattern_file(text, role, id_marks)


def _new_pattern(new_path, inline, id_marks) -> SPPattern:
    if inline is not None:
        marks = inline.split()
        if not marks:
            raise FormatError("inline pattern is empty")
        return SPPattern.from_marks(marks, role=Role.NEW, id_marks=id_marks)
    if new_path is None:
        raise FormatError("provide --new FILE or --pattern \"...\"")
    patterns = _load_patterns(new_path, Role.NEW, id_marks)
    if not patterns:
        raise FormatError(f"no pattern found in {new_path}")
    return patterns[0]


def _fail(err: Exception):
    click.echo(f"error: {err}", err=True)
    sys.exit(EXIT_INPUT_ERROR)


def _build_config(beam, results, code_mode, alphabet_size) -> BuildConfig:
    return BuildConfig(
        beam_width=beam,
        max_results=results,
        code_mode=code_mode,
        alphabet_size=alphabet_size,
    )


grammar_opt = click.option(
    "--grammar", "grammar_path", type=click.Path(exists=True, dir_okay=False)
)
common_opts = [
    click.option("--beam", default=200, show_default=True, help="alignment beam width"),
    click.option("--results", default=10, show_default=True, help="alignments to report"),
    click.option(
        "--code-mode",
        type=click.Choice(["sfe", "ideal"]),
        default="sfe",
        show_default=True,
        help="integer or fractional code sizes",
    ),
    click.option("--alphabet-size", default=2, show_default=True, help="|A| for the match metric"),
    click.option("--seed", default=0, show_default=True, help="reserved for randomized tooling"),
    click.option("--id-marks", default="", help="comma-separated marks treated as identification"),
]


def add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
def main():
    """Pattern alignment, grammar induction, and probabilistic reasoning."""


@main.command()
@grammar_opt
@click.option("--new", "new_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--pattern", "inline", default=None, help='inline New pattern, e.g. "t w o ..."')
@click.option("--audit", "audit_path", type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@add_options(common_opts)
def align(grammar_path, new_path, inline, audit_path, out_dir, beam, results, code_mode, alphabet_size, seed, id_marks):
    """Align a New pattern against a grammar and print the best parses."""
    try:
        marks = _parse_id_marks(id_marks)
        if grammar_path is None:
            raise FormatError("--grammar is required")
        grammar = _load_patterns(grammar_path, Role.OLD, marks)
        new = _new_pattern(new_path, inline, marks)
        config = _build_config(beam, results, code_mode, alphabet_size)
        result = build_alignments(new, grammar, config)
    except (FormatError, OSError, ValueError) as err:
        _fail(err)

    if not result.alignments:
        click.echo("no alignment found")
        sys.exit(EXIT_EMPTY)

    report = alignment_probabilities(result.pool, result.scheme)
    p_rel = {e.alignment.canonical_key: e.p_rel for e in report.entries}
    for rank, a in enumerate(result.alignments, start=1):
        score = result.score_of(a)
        rel = p_rel.get(a.canonical_key)
        rel_text = f"{rel:.4f}" if rel is not None else "-"
        click.echo(f"alignment {rank} ({a.uid})  {score}  p_REL={rel_text}")
        click.echo(render_alignment(a))
        derivation = derive_code_pattern(a)
        click.echo(f"code: {' '.join(derivation.code) or '-'}")
        if derivation.residue:
            click.echo(f"residue: {' '.join(derivation.residue)}")
        click.echo("")

    if audit_path:
        trail = audit_trail(result)
        text = trail.to_json() if audit_path.endswith(".json") else trail.to_text()
        pathlib.Path(audit_path).write_text(text, encoding="utf-8")
        click.echo(f"audit trail written to {audit_path}")
    if out_dir:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        best = result.alignments[0]
        (out / "best_alignment.txt").write_text(render_alignment(best), encoding="utf-8")
        code = derive_code_pattern(best).code
        (out / "code.sp").write_text(" ".join(code) + "\n", encoding="utf-8")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False), required=True)
@grammar_opt
@click.option("--grammar-beam", default=20, show_default=True, help="grammar candidates kept per prune")
@click.option("--out", "out_dir", type=click.Path(file_okay=False))
@add_options(common_opts)
def learn(corpus_path, grammar_path, grammar_beam, out_dir, beam, results, code_mode, alphabet_size, seed, id_marks):
    """Induce grammars from a corpus of New patterns (optionally seeded
    with --grammar as pre-existing old knowledge)."""
    try:
        marks = _parse_id_marks(id_marks)
        corpus = Corpus(tuple(_load_patterns(corpus_path, Role.NEW, marks)))
        if len(corpus) == 0:
            raise FormatError(f"corpus {corpus_path} is empty")
        preload = _load_patterns(grammar_path, Role.OLD, marks) if grammar_path else ()
        config = LearnConfig(
            grammar_beam=grammar_beam,
            code_mode=code_mode,
            alphabet_size=alphabet_size,
            build=BuildConfig(beam_width=beam),
        )
        result = learn_grammars(corpus, config, preload)
    except (FormatError, OSError, ValueError) as err:
        _fail(err)

    click.echo(f"{'rank':<6}{'patterns':<10}{'G':>12}{'E':>12}{'T':>12}")
    for rank, grammar in enumerate(result.grammars[:results], start=1):
        s = grammar.score
        click.echo(
            f"{rank:<6}{len(grammar.patterns):<10}{s.g:>12.2f}{s.e:>12.2f}{s.t:>12.2f}"
        )
    best = result.best
    click.echo("\nbest grammar:")
    click.echo(serialize_pattern_file(best.patterns), nl=False)

    if out_dir:
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for rank, grammar in enumerate(result.grammars[:results], start=1):
            (out / f"grammar_{rank}.spg").write_text(
                serialize_pattern_file(grammar.patterns), encoding="utf-8"
            )
        (out / "provenance.txt").write_text(result.provenance_text(), encoding="utf-8")
        click.echo(f"\ngrammars written to {out_dir}")
    sys.exit(EXIT_OK)


@main.command()
@grammar_opt
@click.option("--new", "new_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--pattern", "inline", default=None, help='inline query, e.g. "bird Tweety"')
@add_options(common_opts)
def reason(grammar_path, new_path, inline, beam, results, code_mode, alphabet_size, seed, id_marks):
    """Probabilistic inference: reference-set alignments, relative
    probabilities, and the conclusions each alignment licenses."""
    try:
        marks = _parse_id_marks(id_marks)
        if grammar_path is None:
            raise FormatError("--grammar is required")
        grammar = _load_patterns(grammar_path, Role.OLD, marks)
        new = _new_pattern(new_path, inline, marks)
        config = _build_config(beam, results, code_mode, alphabet_size)
        result = build_alignments(new, grammar, config)
    except (FormatError, OSError, ValueError) as err:
        _fail(err)

    if not result.alignments:
        click.echo("no alignment found")
        sys.exit(EXIT_EMPTY)

    report = alignment_probabilities(result.pool, result.scheme)
    click.echo(f"reference set: {len(report.entries)} alignment(s), p_A_SUM={report.p_a_sum:.3e}")
    for rank, entry in enumerate(report.entries, start=1):
        a = entry.alignment
        inferences = extract_inferences(a)
        inferred = " ".join(i.mark for i in inferences) or "-"
        click.echo(f"\nalternative {rank}: p_REL={entry.p_rel:.4f} p_ABS={entry.p_abs:.3e}")
        click.echo(render_alignment(a))
        click.echo(f"inferences: {inferred}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--entropy", "entropy_arg", default=None, help='probabilities, e.g. "0.5,0.5"')
@click.option("--search-space", "space_arg", type=int, default=None, help="sequence length N")
@click.option("--redundancy", "redundancy_arg", default=None, help='freq:size pairs, e.g. "3:4,2:5"')
@click.option("--grammar-T", "grammar_t", is_flag=True, help="score --grammar against --corpus")
@grammar_opt
@click.option("--corpus", "corpus_path", type=click.Path(exists=True, dir_okay=False))
@add_options(common_opts)
def score(entropy_arg, space_arg, redundancy_arg, grammar_t, grammar_path, corpus_path, beam, results, code_mode, alphabet_size, seed, id_marks):
    """Print requested information metrics as labeled decimal values."""
    try:
        printed = False
        if entropy_arg is not None:
            probs = [float(x) for x in entropy_arg.replace(",", " ").split()]
            click.echo(f"entropy: {entropy_fn(probs)}")
            printed = True
        if space_arg is not None:
            p, c = search_space_stats(space_arg)
            click.echo(f"P={p} C={c}")
            printed = True
        if redundancy_arg is not None:
            pairs = []
            for chunk in redundancy_arg.replace(",", " ").split():
                f, s = chunk.split(":")
                pairs.append((int(f), float(s)))
            click.echo(f"R={redundancy_fn(pairs)}")
            printed = True
        if grammar_t:
            marks = _parse_id_marks(id_marks)
            if not grammar_path or not corpus_path:
                raise FormatError("--grammar-T requires --grammar and --corpus")
            grammar = _load_patterns(grammar_path, Role.OLD, marks)
            corpus = Corpus(tuple(_load_patterns(corpus_path, Role.NEW, marks)))
            grammar_score, encodings = score_grammar(grammar, corpus, code_mode)
            uncovered = sum(1 for e in encodings if not e.covered)
            click.echo(
                f"G={grammar_score.g:.4f} E={grammar_score.e:.4f} T={grammar_score.t:.4f}"
                + (f" uncovered={uncovered}" if uncovered else "")
            )
            printed = True
        if not printed:
            raise FormatError("nothing to score: pass --entropy, --search-space, --redundancy, or --grammar-T")
    except (FormatError, OSError, ValueError) as err:
        _fail(err)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()

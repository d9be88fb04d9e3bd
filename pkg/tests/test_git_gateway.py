from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergepred.errors import GitTimeoutError, ParseError
from mergepred.git_gateway import (
    LOG_FORMAT,
    ChangeKind,
    CommitMeta,
    check_git_version,
    git_version,
    is_commit_hash,
    parse_changes,
    parse_log_records,
    run_git,
)
from mergepred.simcorpus import RepoBuilder

H1 = "a" * 40
H2 = "b" * 40
H3 = "c" * 40


def test_nonzero_exit_is_returned_not_raised(tmp_path):
    res = run_git(tmp_path, ["rev-parse", "HEAD"])
    assert res.exit_code != 0
    assert not res.ok
    assert res.stderr
    assert res.duration_ms >= 0


def test_missing_repo_path_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        run_git(tmp_path / "nope", ["status"])


def test_timeout_carries_partial_output(tmp_path):
    with pytest.raises(TimeoutError) as info:
        run_git(tmp_path, ["-c", "alias.zz=!sleep 5", "zz"], timeout=0.2)
    assert isinstance(info.value, GitTimeoutError)
    assert isinstance(info.value.stdout, bytes)


def test_git_version_is_supported():
    assert git_version()[0].isdigit()
    assert check_git_version() == git_version()


def test_log_records_from_real_history(tmp_path):
    b = RepoBuilder(tmp_path / "r")
    c1 = b.commit("First line\n\nbody with\nseveral lines", 1_000, "Ann@Example.org", write={"f": "1\n"})
    c2 = b.commit("second", 2_000, "bo@example.org", write={"f": "2\n"})
    res = run_git(b.path, ["log", "-z", f"--format={LOG_FORMAT}", "HEAD"])
    recs = parse_log_records(res.stdout)
    assert [r.id for r in recs] == [c2, c1]
    assert recs[0].parent_ids == (c1,)
    assert recs[1].parent_ids == ()
    assert recs[1].message == "First line\n\nbody with\nseveral lines"
    assert recs[1].author_email == "Ann@Example.org"
    assert recs[0].author_timestamp == 2_000


def test_log_records_empty_output():
    assert parse_log_records(b"") == []


def test_log_records_octopus_parents():
    raw = f"{H1}\0{H2} {H3} {H2}\0x@y\0{5}\0merge\n\0".encode()
    (rec,) = parse_log_records(raw)
    assert rec.parent_ids == (H2, H3, H2)


def test_log_records_truncated_reports_offset():
    good = f"{H1}\0\0x@y\0{5}\0msg\n\0".encode()
    with pytest.raises(ParseError) as info:
        parse_log_records(good + f"{H2}\0{H1}\0".encode())
    assert info.value.offset == len(good)


@pytest.mark.parametrize(
    "raw",
    [
        f"zz\0\0x@y\0{5}\0msg\0",
        f"{H1}\0nothex\0x@y\0{5}\0msg\0",
        f"{H1}\0\0x@y\0soon\0msg\0",
    ],
)
def test_log_records_malformed(raw):
    with pytest.raises(ParseError):
        parse_log_records(raw.encode())


_msg = st.text(st.characters(blacklist_characters="\0", blacklist_categories=("Cs",)), max_size=40)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([H1, H2, H3]), st.integers(0, 2**31), _msg), max_size=6))
def test_log_records_roundtrip(items):
    raw = "".join(f"{h}\0{H3}\0e@x\0{ts}\0{m}\n\0" for h, ts, m in items).encode("utf-8", "surrogateescape")
    recs = parse_log_records(raw)
    assert [(r.id, r.author_timestamp) for r in recs] == [(h, ts) for h, ts, _ in items]
    assert [r.message for r in recs] == [(m + "\n").rstrip("\n") for _, _, m in items]


def test_changes_z_format_rename_and_binary():
    numstat = "3\t1\tsrc/a.py\0-\t-\timg.png\0" "0\t0\t\0old.txt\0new/name.txt\0" "5\t0\tadded.c\0"
    names = "M\0src/a.py\0A\0img.png\0R097\0old.txt\0new/name.txt\0A\0added.c\0"
    changes = {c.path: c for c in parse_changes(numstat, names)}
    assert changes["src/a.py"].kind is ChangeKind.MODIFIED
    assert (changes["src/a.py"].lines_added, changes["src/a.py"].lines_deleted) == (3, 1)
    assert changes["img.png"].lines_added is None
    rn = changes["new/name.txt"]
    assert rn.kind is ChangeKind.RENAMED and rn.old_path == "old.txt"
    assert changes["added.c"].kind is ChangeKind.ADDED


def test_changes_line_format_brace_rename():
    numstat = "2\t2\tsrc/{old => new}/f.py\n1\t0\tdoc.md\n"
    names = "R090\tsrc/old/f.py\tsrc/new/f.py\nC100\tdoc0.md\tdoc.md\n"
    changes = parse_changes(numstat, names)
    assert [(c.kind, c.path, c.old_path) for c in changes] == [
        (ChangeKind.RENAMED, "src/new/f.py", "src/old/f.py"),
        (ChangeKind.COPIED, "doc.md", "doc0.md"),
    ]


def test_changes_mismatch_raises():
    with pytest.raises(ParseError):
        parse_changes("1\t0\ta\0", "M\0b\0")
    with pytest.raises(ParseError):
        parse_changes("1\t0\ta\0" "1\t0\tb\0", "M\0a\0")


def test_changes_unknown_status():
    with pytest.raises(ParseError):
        parse_changes("1\t0\ta\0", "X\0a\0")


def test_changes_from_real_diff(tmp_path):
    b = RepoBuilder(tmp_path / "r")
    base = b.commit("base", 1, write={"keep.txt": "k\n" * 20, "gone.txt": "g\n", "mod.txt": "m\n"})
    tip = b.commit("work", 2, write={"mod.txt": "m2\nm3\n", "bin.dat": "\0\1\2"}, delete=("gone.txt",),
                   rename={"keep.txt": "moved/keep.txt"})
    ns = run_git(b.path, ["diff", "-z", "--numstat", "-M", "-C", base, tip])
    st_ = run_git(b.path, ["diff", "-z", "--name-status", "-M", "-C", base, tip])
    got = {c.path: c for c in parse_changes(ns.stdout, st_.stdout)}
    assert got["moved/keep.txt"].kind is ChangeKind.RENAMED
    assert got["gone.txt"].kind is ChangeKind.DELETED
    assert (got["mod.txt"].lines_added, got["mod.txt"].lines_deleted) == (2, 1)
    assert got["bin.dat"].lines_added is None


def test_is_commit_hash():
    assert is_commit_hash(H1)
    assert not is_commit_hash(H1.upper())
    assert not is_commit_hash(H1[:39])


def test_commit_meta_is_value_type():
    assert CommitMeta(H1, (), "e", 1, "m") == CommitMeta(H1, (), "e", 1, "m")

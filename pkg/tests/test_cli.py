import pytest

from teamcheck import changelog
from teamcheck.cli import main
from teamcheck.replay import parse_csv
from teamcheck.store import PUBLIC


@pytest.fixture
def run(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TEAMCHECK_STORE", str(tmp_path / "store.log"))

    def go(*argv):
        code = main(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err
    go.path = tmp_path / "store.log"
    return go


@pytest.fixture
def uml(run):
    assert run("init", "--uml")[0] == 0
    for label in ("wa-alice", "wa-bob", "wa-carol"):
        assert run("workarea", "add", label)[0] == 0
    return run


def test_init(run, tmp_path):
    code, out, _ = run("init")
    assert code == 0 and run.path.exists()
    assert list(changelog.load(run.path).work_areas) == [PUBLIC]
    code, _, err = run("init")
    assert code != 0 and "--force" in err
    assert run("init", "--force", "--uml")[0] == 0


def test_explicit_store_flag(tmp_path, capsys):
    path = tmp_path / "other.log"
    assert main(["--store", str(path), "init"]) == 0
    assert path.exists()


def test_missing_store(run):
    code, _, err = run("check", "public")
    assert code == 2 and "init" in err


def test_apply_feedback_lines(uml):
    code, out, _ = uml("apply", "wa-alice", "--create", "L1:uml:Lifeline")
    assert code == 0 and out.splitlines() == ["CR01 L1 break"]
    code, out, _ = uml("apply", "wa-alice", "L1.class->C1")
    assert code == 0 and out.splitlines() == ["CR01 L1 hold"]


def test_apply_is_atomic(uml):
    uml("apply", "wa-alice", "--create", "L1:uml:Lifeline")
    before = uml.path.read_bytes()
    for bad in (["L1.class"], ["L1.class=="], ["--create", "X:uml:Nope"],
                ["L1.name=ok", "L1.class=notalink"], ["--delete", "L1"]):
        code, _, err = uml("apply", "wa-alice", *bad)
        assert code == 2 and err
        assert uml.path.read_bytes() == before
    code, _, _ = uml("apply", "nowhere", "L1.name=x")
    assert code == 2 and uml.path.read_bytes() == before


def test_apply_values_and_delete(uml):
    uml("apply", "wa-alice", "--create", "C1:uml:Class", 'C1.name="Robot Arm"', "C1.isAbstract=true",
        "C1.fields->F1,F2")
    s = changelog.load(uml.path)
    wa = s.find_work_area("wa-alice").work_area_id
    assert s.resolve_property(wa, "C1", "name").value == "Robot Arm"
    assert s.resolve_property(wa, "C1", "isAbstract").value is True
    assert len(s.resolve_property(wa, "C1", "fields").value) == 2
    uml("apply", "wa-alice", "--delete", "C1.name")
    s = changelog.load(uml.path)
    assert s.resolve_property(wa, "C1", "name").value is None


def test_check_modes(uml):
    uml("apply", "wa-alice", "--create", "L1:uml:Lifeline")
    uml("apply", "wa-bob", "L1.class->C1")
    code, out, _ = uml("check", "wa-alice")
    assert code == 1 and out.splitlines() == ["CR01 L1 break"]
    code, out, _ = uml("check", "wa-alice", "--mode", "group", "--group", "wa-bob,wa-carol")
    assert code == 0 and out.splitlines()[0].startswith("CR01 L1 hold group(")
    # the hierarchy result was left alone
    code, out, _ = uml("check", "wa-alice")
    assert code == 1 and out.splitlines() == ["CR01 L1 break"]
    code, out, _ = uml("check", "wa-alice", "--format", "csv")
    assert out.splitlines() == ["CR01,L1,break,hierarchy"]


def test_group_and_hierarchy_verdicts_differ_like_batch(uml):
    from teamcheck.batch import batch_check
    from teamcheck.engine import Engine
    uml("apply", "wa-alice", "--create", "M1:uml:Message", "M1.action=grab", "M1.receiver->L1")
    uml("apply", "wa-bob", "--create", "L1:uml:Lifeline", "L1.class->C1", "--create", "C1:uml:Class",
        "C1.operations->O1", "--create", "O1:uml:Operation", "O1.name=grab")
    uml("group", "define", "team", "wa-bob")
    hier = uml("check", "wa-alice")
    grp = uml("check", "wa-alice", "--mode", "group", "--group", "team")
    assert hier[0] == 1 and grp[0] == 0
    s = changelog.load(uml.path)
    e = Engine(s)
    crds = e.crds.values()
    wa = s.find_work_area("wa-alice").work_area_id
    assert batch_check(s, crds)[("cre:CR04:M1", wa)] is False
    assert batch_check(s, crds, "team")[("cre:CR04:M1", wa)] is True


def test_check_errors(uml):
    assert uml("check", "public")[0] == 0
    assert uml("check", "wa-alice", "--mode", "group")[0] == 2
    assert uml("check", "wa-zed")[0] == 2
    assert uml("check", "wa-alice", "--group", "wa-bob")[0] == 2


def test_commit(uml):
    uml("apply", "wa-alice", "--create", "L1:uml:Lifeline", "L1.class->C1")
    code, out, _ = uml("commit", "wa-alice")
    assert code == 0 and out.startswith("committed ") and "to public" in out
    code, out, _ = uml("check", "public")
    assert code == 0 and out.splitlines() == ["CR01 L1 hold"]
    assert uml("commit", "public")[0] == 2


def test_commit_group(uml):
    uml("apply", "wa-alice", "--create", "L1:uml:Lifeline")
    uml("apply", "wa-bob", "L1.class->C1")
    uml("group", "define", "team", "wa-alice,wa-bob")
    code, out, _ = uml("commit", "--group", "team")
    assert code == 0 and "group team" in out
    assert uml("check", "public")[1].splitlines() == ["CR01 L1 hold"]
    assert uml("commit", "--group", "nope")[0] == 2


def test_workarea_list(uml):
    code, out, _ = uml("workarea", "list")
    labels = [line.split("\t")[1] for line in out.splitlines()]
    assert code == 0 and labels == ["public", "wa-alice", "wa-bob", "wa-carol"]
    assert uml("workarea", "add", "wa-alice")[0] == 2


def test_replay_generate_is_deterministic(run):
    a = run("replay", "--generate", "1,88,3,0.2", "--no-timing")
    b = run("replay", "--generate", "1,88,3,0.2", "--no-timing")
    assert a[0] == 0 and a[1] == b[1]
    assert len(a[1].splitlines()) == 3


def test_replay_bundled_corpus(run):
    code, out, _ = run("replay", "--format", "csv", "--verify")
    assert code == 0
    (row,) = parse_csv(out)
    assert row.rule_evaluations > 0 and row.total_commands == 585


def test_replay_csv_round_trip(run):
    code, out, _ = run("replay", "--generate", "2,50,2,0.4", "--format", "csv")
    (row,) = parse_csv(out)
    from teamcheck.replay import report
    assert report([row], "csv") == out


def test_replay_figure(run, tmp_path):
    fig = tmp_path / "access.png"
    code, out, _ = run("replay", "--generate", "1,40,2,0.3", "--figure", str(fig))
    assert code == 0 and fig.stat().st_size > 0


def test_replay_errors(run, tmp_path):
    assert run("replay", "--generate", "1,2")[0] == 2
    assert run("replay", "--generate", "1,5,9,0.1")[0] == 2
    bad = tmp_path / "bad.corpus"
    bad.write_text("ELEM a T { x->missing }\n")
    code, _, err = run("replay", str(bad))
    assert code == 2 and "missing" in err
    assert run("replay", str(bad), "--dangling", "drop")[0] == 0
    cat = tmp_path / "bad.catalog"
    cat.write_text("RULE X ON uml:Class: self.a =\n")
    code, _, err = run("replay", "--catalog", str(cat))
    assert code == 2 and "line 1" in err
    assert run("replay", "--generate", "1,20,2,0.1", "--group", "p7")[0] == 2


def test_usage_errors_exit_2(run):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2

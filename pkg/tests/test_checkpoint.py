import numpy as np
import pytest

from qsagent import qs
from qsagent.agent import ActorCriticAgent
from qsagent.checkpoint import (FORMAT_VERSION, Checkpoint, dumps, load_checkpoint, loads,
                                save_checkpoint)
from qsagent.config import TrainConfig
from qsagent.envmodel import DELTA, EnvNet
from qsagent.errors import (CheckpointError, CorruptCheckpointError, TruncatedCheckpointError,
                            VersionMismatchError)


def random_checkpoint(seed=0, target="absolute"):
    rng = np.random.default_rng(seed)
    agent = ActorCriticAgent.create(rng, hidden=7)
    envnet = EnvNet.create(rng, hidden=5, target=target)
    for net, opt in ((agent.actor, agent.actor_opt), (envnet.net, envnet.opt)):
        for p, m, v in zip(net.params(), opt.m, opt.v):
            p[...] = rng.normal(size=p.shape) * 10.0 ** rng.integers(-300, 300, size=p.shape)
            m[...] = rng.normal(size=m.shape)
            v[...] = rng.random(size=v.shape)
        opt.step_count = int(rng.integers(1, 10**6))
    mem = qs.TransitionMemory(0.9)
    for _ in range(40):
        qs.observe(mem, rng.normal(size=8), float(rng.normal()))
    qs.apply_edit(mem, qs.RemoveNode(int(mem.ids[3])))
    cfg = TrainConfig(master_seed=int(rng.integers(1 << 31)), alpha=float(rng.random()))
    return Checkpoint(cfg, 123, agent, envnet, mem)


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_is_bit_exact(seed, tmp_path):
    ck = random_checkpoint(seed)
    back = load_checkpoint(save_checkpoint(tmp_path / "c.txt", ck))
    assert back == ck
    assert back.config == ck.config and back.master_seed == ck.master_seed
    for a, b in zip(ck.agent.actor.params() + ck.envnet.opt.v,
                    back.agent.actor.params() + back.envnet.opt.v):
        assert a.tobytes() == b.tobytes()
    assert back.envnet.opt.step_count == ck.envnet.opt.step_count
    assert np.array_equal(back.memory.ids, ck.memory.ids)
    assert back.memory.next_id == ck.memory.next_id
    assert back.memory.units.tobytes() == ck.memory.units.tobytes()
    assert dumps(back) == dumps(ck)


def test_special_values_survive():
    ck = random_checkpoint()
    ck.agent.critic.weights[0][0, :4] = [-0.0, 5e-324, np.finfo(float).max, -1.5]
    back = loads(dumps(ck))
    assert back.agent.critic.weights[0][0, :4].tobytes() == ck.agent.critic.weights[0][0, :4].tobytes()


def test_envnet_target_is_kept():
    back = loads(dumps(random_checkpoint(target=DELTA)))
    assert back.envnet.target == DELTA


def test_empty_memory_round_trips():
    ck = random_checkpoint()
    ck.memory = qs.TransitionMemory(0.97)
    back = loads(dumps(ck))
    assert len(back.memory) == 0 and back == ck


@pytest.mark.parametrize("frac", [0.0005, 0.3, 0.7, 0.999])
def test_truncation_detected(frac, tmp_path):
    text = dumps(random_checkpoint())
    p = tmp_path / "t.txt"
    p.write_text(text[: int(len(text) * frac)])
    with pytest.raises(TruncatedCheckpointError):
        load_checkpoint(p)


def test_truncated_at_record_boundary():
    lines = dumps(random_checkpoint()).splitlines()
    with pytest.raises(TruncatedCheckpointError):
        loads("\n".join(lines[:-5] + [lines[-1]]) + "\n")


def test_version_mismatch():
    text = dumps(random_checkpoint()).replace(f"format_version {FORMAT_VERSION}", "format_version 999", 1)
    with pytest.raises(VersionMismatchError):
        loads(text)


@pytest.mark.parametrize("mutate", [
    lambda t: "not-a-checkpoint\n" + t,
    lambda t: t.replace("array actor.W0 f8", "array actor.W0 q8", 1),
    lambda t: t.replace("config alpha ", "config alpha zz", 1),
    lambda t: t.replace("scalar episode_index", "scalr episode_index", 1),
])
def test_corruption_detected(mutate):
    with pytest.raises(CorruptCheckpointError):
        loads(mutate(dumps(random_checkpoint())))


def test_binary_garbage_is_corrupt(tmp_path):
    p = tmp_path / "g.bin"
    p.write_bytes(bytes(range(256)) * 4)
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_error_kinds_are_distinct():
    assert issubclass(TruncatedCheckpointError, CorruptCheckpointError)
    assert not issubclass(VersionMismatchError, CorruptCheckpointError)


def test_digest_tracks_content():
    ck = random_checkpoint()
    d = ck.digest()
    ck.memory.values[0] += 1.0
    assert ck.digest() != d

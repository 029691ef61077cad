import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(f"ACCEPTANCE {line}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from flowsurrogate.autoencoder import AEConfig, encode_batch, save_ae, train_ae
from flowsurrogate.checkpoint import file_sha256
from flowsurrogate.data import load_dataset
from flowsurrogate.flow import FlowTrainConfig, save_flow, train_flow
from flowsurrogate.surrogate import normalize
from flowsurrogate.synth import SynthConfig, make_dataset


@pytest.fixture(scope="session")
def tiny_artifacts(tmp_path_factory):
    """A small but complete artifact set: dataset file pair, AE checkpoint,
    flow checkpoint (referencing the AE), all in one workspace directory.

    Sized for determinism/contract tests, not prediction quality.
    """
    workspace = tmp_path_factory.mktemp("workspace")
    cfg = SynthConfig(resolution=(8, 8, 8), n_params=3, seed=1,
                      train_count=12, test_count=3)
    dataset = make_dataset(cfg, workspace / "ds")

    ae, _ = train_ae(dataset, AEConfig(latent_dim=8, hidden=(32,), epochs=25,
                                       batch_size=6, lr=1e-3), seed=2)
    ae_path = workspace / "ae.npz"
    save_ae(ae_path, ae)

    train_idx = dataset.indices("train")
    latents = encode_batch(ae, dataset.fields[train_idx])
    conds = np.array([normalize(dataset.space, dataset.params[i]) for i in train_idx])
    flow, _ = train_flow(latents, conds,
                         FlowTrainConfig(k1=1, k2=1, hidden=(16,), epochs=30,
                                         batch_size=6, lr=1e-3), seed=3)
    flow.ae_ref = {"name": ae_path.name, "sha256": file_sha256(ae_path)}
    flow_path = workspace / "flow.npz"
    save_flow(flow_path, flow)

    # a second AE the flow was NOT trained against, for consistency checks
    ae_other, _ = train_ae(dataset, AEConfig(latent_dim=8, hidden=(32,), epochs=2,
                                             batch_size=6, lr=1e-3), seed=9)
    save_ae(workspace / "ae-other.npz", ae_other)

    return {
        "workspace": workspace,
        "dataset_path": workspace / "ds.json",
        "dataset": load_dataset(workspace / "ds.json"),
        "ae_path": ae_path,
        "ae": ae,
        "flow_path": flow_path,
        "flow": flow,
    }

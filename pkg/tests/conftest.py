import numpy as np
import pytest
import torch


def central_differences(fn, tensors, h=1e-5):
    """Numerical gradient of scalar fn() w.r.t. every element of each tensor (modified in place)."""
    grads = []
    with torch.no_grad():
        for t in tensors:
            g = torch.zeros_like(t)
            flat, gflat = t.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = fn().item()
                flat[i] = orig - h
                down = fn().item()
                flat[i] = orig
                gflat[i] = (up - down) / (2 * h)
            grads.append(g)
    return grads


def relative_error(analytic, numeric):
    a = torch.cat([g.reshape(-1) for g in analytic])
    n = torch.cat([g.reshape(-1) for g in numeric])
    return ((a - n).norm() / max(a.norm().item(), n.norm().item(), 1e-12)).item()


def gradient_check(fn, tensors, h=1e-5):
    """Relative error between autograd and central differences for scalar fn()."""
    for t in tensors:
        t.grad = None
    fn().backward()
    analytic = [t.grad.detach().clone() for t in tensors]
    numeric = central_differences(fn, tensors, h)
    return relative_error(analytic, numeric)


def projected(module_or_fn, *inputs, seed=0):
    """Scalar objective: fixed random projection of the output, so every output element matters."""
    with torch.no_grad():
        ref = module_or_fn(*inputs)
    proj = torch.randn(ref.shape, generator=torch.Generator().manual_seed(seed), dtype=ref.dtype)
    return lambda: (module_or_fn(*inputs) * proj).sum()


@pytest.fixture
def gradcheck():
    return gradient_check


@pytest.fixture
def project():
    return projected


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)

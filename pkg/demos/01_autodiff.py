"""A tour of the autodiff engine: tensors, gradients, gradient checking,
and a ten-line training loop fitting a linear map with Adam."""

import numpy as np

import storykit.autodiff as ad
from storykit.autodiff import Tensor

print("== tensors and gradients ==")
x = Tensor(np.array([1.0, 2.0, 3.0]), requires_grad=True)
loss = ad.tsum(ad.mul(x, x))          # sum of squares
ad.backward(loss)
print("d/dx sum(x^2) =", x.grad, "(expected 2x =", 2 * x.value, ")")

print("\n== gradient checking ==")
rng = np.random.default_rng(0)
w = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
t = rng.normal(size=(4, 2))
a = rng.normal(size=(4, 3))


def f(params):
    pred = ad.matmul(Tensor(a), params["w"])
    diff = ad.sub(pred, Tensor(t))
    return ad.tsum(ad.mul(diff, diff))


err = ad.grad_check(f, {"w": w})
print(f"max relative error vs central differences: {err:.2e}")

print("\n== training with Adam ==")
true_w = rng.normal(size=(3, 2))
X = rng.normal(size=(64, 3))
Y = X @ true_w
params = {"w": Tensor(np.zeros((3, 2)), requires_grad=True)}
state = ad.AdamState(lr=0.05)
for step in range(200):
    ad.zero_grads(params)
    pred = ad.matmul(Tensor(X), params["w"])
    diff = ad.sub(pred, Tensor(Y))
    loss = ad.tsum(ad.mul(diff, diff))
    ad.backward(loss)
    ad.adam_step(params, {n: p.grad for n, p in params.items()}, state)
    if step % 50 == 0:
        print(f"step {step:3d}  loss {float(loss.value):.6f}")
print("recovered weights within",
      f"{np.abs(params['w'].value - true_w).max():.2e}", "of the target")

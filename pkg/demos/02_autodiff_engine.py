"""Tour of the numpy autodiff core.

Shows the graph mechanics on a residual-style expression, then verifies
each network primitive against central finite differences.
"""

import numpy as np

from dosids import ndgrad as ng
from dosids.ndgrad import Tensor, grad_check

print("== gradients accumulate through skip connections ==")
x = Tensor(np.array([2.0]), requires_grad=True)
y = x * 3.0 + x          # d/dx (3x + x) = 4
y.backward()
print(f"d(3x + x)/dx at x=2: {x.grad[0]} (expect 4.0)")

print("\n== a conv layer by hand ==")
signal = Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]]), requires_grad=True)
kernel = Tensor(np.array([[[1.0, 1.0]]]), requires_grad=True)
out = ng.conv1d(signal, kernel)
print("conv([1,2,3,4], [1,1]) =", out.data.ravel())
out.sum().backward()
print("d(sum)/d(signal) =", signal.grad.ravel(), " d(sum)/d(kernel) =", kernel.grad.ravel())

print("\n== finite-difference verification of every primitive ==")
rng = np.random.default_rng(0)

xc = Tensor(rng.normal(size=(2, 3, 8)), requires_grad=True)
wc = Tensor(rng.normal(size=(4, 3, 3)), requires_grad=True)
print(f"conv1d            {grad_check(lambda: ng.conv1d(xc, wc, 2, 1).mean(), [xc, wc]):.2e}")

xt = Tensor(rng.normal(size=(2, 3, 5)), requires_grad=True)
wt = Tensor(rng.normal(size=(3, 4, 4)), requires_grad=True)
print(f"conv_transpose1d  {grad_check(lambda: ng.conv_transpose1d(xt, wt, 2, 1).mean(), [xt, wt]):.2e}")

xb = Tensor(rng.normal(size=(3, 4, 5)), requires_grad=True)
g = Tensor(np.ones(4), requires_grad=True)
b = Tensor(np.zeros(4), requires_grad=True)
stats = ng.RunningStats(4)
print(f"batch_norm1d      {grad_check(lambda: ng.batch_norm1d(xb, g, b, stats, True).mean(), [xb, g, b]):.2e}")

xl = Tensor(rng.normal(size=(2, 6, 4)), requires_grad=True)
print(f"lrn               {grad_check(lambda: ng.lrn(xl, alpha=0.05).mean(), [xl]):.2e}")

xp = Tensor(rng.normal(size=(2, 3, 9)), requires_grad=True)
print(f"max_pool1d        {grad_check(lambda: ng.max_pool1d(xp, 3, 2).mean(), [xp]):.2e}")

xd = Tensor(rng.normal(size=(3, 5)), requires_grad=True)
wd = Tensor(rng.normal(size=(4, 5)), requires_grad=True)
print(f"dense             {grad_check(lambda: ng.dense(xd, wd).mean(), [xd, wd]):.2e}")

lg = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
tg = rng.integers(0, 4, 5)
print(f"softmax_ce        {grad_check(lambda: ng.softmax_cross_entropy(lg, tg)[0], [lg]):.2e}")

print("\n== sgd with momentum and weight decay ==")
p = Tensor(np.array([1.0]), requires_grad=True)
opt = ng.SGD([p], learning_rate=0.1, momentum=0.9)
for step in range(3):
    p.grad = np.array([1.0])
    opt.step()
    print(f"step {step + 1}: param = {p.data[0]:.4f}")

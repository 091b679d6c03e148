"""
Gradients and masked attention
==============================

A tour of the tensor library underneath the model: build a tiny expression,
backpropagate through it, then look at the attention weights of an encoder
layer under a hand-written mask.
"""

# %%
import numpy as np

from vjmht import autodiff as ad
from vjmht.autodiff import Tensor
from vjmht.transformer import encoder_layer, init_encoder_layer

rng = np.random.default_rng(0)

# %% A least-squares loss and its gradient
W = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
x = rng.normal(size=(4, 1))
y = rng.normal(size=(3, 1))
loss = ad.mse(ad.matmul(W, x), y)
loss.backward()
print("loss", loss.item())
print("dL/dW from backprop:\n", W.grad)
print("closed form (2/3) (Wx - y) x^T:\n", (2 / 3) * (W.data @ x - y) @ x.T)

# %% One encoder layer, token 2 hidden from everyone else
layer = init_encoder_layer(rng, d=8, heads=2, d_ff=16)
tokens = Tensor(rng.normal(size=(4, 8)))
allowed = np.ones((4, 4), dtype=bool)
allowed[:, 2] = False
allowed[2, 2] = True

heads = []
out = encoder_layer(tokens, allowed, layer, record=heads)
np.set_printoptions(precision=3, suppress=True)
for i, att in enumerate(heads):
    print(f"head {i} attention (column 2 is exactly zero off the diagonal):\n{att}")
print("output shape", out.shape)

# Latent similarity loss on the fixed 100-dim pair used by test_cloaks.cpp:
#   a_i = sin(0.3 i + 0.1),  b_i = cos(0.17 i) - 0.2,  i = 0..99
import numpy as np

i = np.arange(100, dtype=np.float64)
a = np.sin(0.3 * i + 0.1)
b = np.cos(0.17 * i) - 0.2
cos = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
mse = np.mean((a - b) ** 2)
print(float(-cos + mse))

"""
Synthetic pigment-network images with known ground truth, used to test the
extraction pipeline end to end.
"""
import numpy as np
from scipy import ndimage
from skimage.draw import line

from models.images import RgbImage, BinaryImage
from models.dataset import SynthParams


def _grid_nodes(p, rng, width, height):
    # one node row/column beyond each edge so lines run off the image
    start = p.spacing // 2
    ys = start + p.spacing * np.arange(-1, height // p.spacing + 2)
    xs = start + p.spacing * np.arange(-1, width // p.spacing + 2)
    nodes = np.stack(np.meshgrid(ys, xs, indexing='ij'), axis=-1).astype(np.float64)
    if p.irregularity > 0:
        reach = p.irregularity * p.spacing / 4.0
        nodes += rng.uniform(-reach, reach, size=nodes.shape)
    return np.rint(nodes).astype(np.int64)


def _draw_segment(centre, a, b):
    rr, cc = line(int(a[0]), int(a[1]), int(b[0]), int(b[1]))
    inside = (rr >= 0) & (rr < centre.shape[0]) & (cc >= 0) & (cc < centre.shape[1])
    centre[rr[inside], cc[inside]] = True


def synth_network_image(p=SynthParams()):
    """
    Render a dark grid on a light-brown background.

    Returns:
        (RgbImage, BinaryImage) where the mask marks the grid pixels.
    """
    width, height = int(p.size[0]), int(p.size[1])
    rng = np.random.default_rng(p.seed)
    nodes = _grid_nodes(p, rng, width, height)

    centre = np.zeros((height, width), dtype=bool)
    rows, cols = nodes.shape[:2]
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                _draw_segment(centre, nodes[i, j], nodes[i, j + 1])
            if i + 1 < rows:
                _draw_segment(centre, nodes[i, j], nodes[i + 1, j])

    if p.line_width > 1:
        mask = ndimage.binary_dilation(centre, structure=np.ones((p.line_width, p.line_width), dtype=bool))
    else:
        mask = centre

    tint = np.asarray(p.background, dtype=np.float64).reshape(1, 1, 3)
    shade = 1.0 - p.darkness * mask[..., None]
    pixels = np.clip(np.rint(tint * shade), 0, 255).astype(np.uint8)
    return RgbImage(pixels), BinaryImage(mask)


def constant_image(rgb, size=(512, 512)):
    """Uniform image of one color; carries no network."""
    width, height = size
    pixels = np.broadcast_to(np.asarray(rgb, dtype=np.uint8), (height, width, 3))
    return RgbImage(pixels.copy())

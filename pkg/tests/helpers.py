"""Random small instances shared by the property and acceptance tests."""

from mvstream.model import NavigationWindow, Representation, VideoModel
from mvstream.population import UserClass

RATES = (300, 600, 1000, 2000, 4000)


def random_video(rng, name="x", max_cameras=4, max_q=4, depth=False) -> VideoModel:
    q = int(rng.integers(1, max_q + 1))
    n = int(rng.integers(2, max_cameras + 1))
    a = float(rng.choice([1.0, 0.98]))
    e = float(rng.uniform(-90, 900))
    # keep quality inside [0, 1] for every ladder rate
    b = float(rng.uniform(0.05, 0.6)) * a * (300 + e)
    return VideoModel(name, tuple(range(0, n * q, q)), a, b, e, float(rng.uniform(0, 2)), 0.35,
                      1.0, 1.0, q_ticks=q,
                      depth_overhead=float(rng.choice([0, 0, 50])) if depth else 0.0)


def random_window(rng, video) -> NavigationWindow:
    lo = int(rng.integers(video.first, video.last + 1))
    return NavigationWindow(lo, int(rng.integers(lo, video.last + 1)))


def client_instance(rng):
    """(window, stored reps, budget, video) within the client oracle guard."""
    video = random_video(rng)
    rates = sorted(int(r) for r in rng.choice(RATES, size=int(rng.integers(1, 4)), replace=False))
    reps = [Representation("x", c, r) for c in video.cameras for r in rates if rng.random() < 0.8]
    budget = float(rng.choice([700, 1500, 3000, 6000, 20000]))
    return random_window(rng, video), reps, budget, video


def server_instance(rng, max_videos=3):
    """(rates, population, storage budget, videos) within the set oracle guard."""
    videos = {}
    for k in range(int(rng.integers(1, max_videos + 1))):
        videos[f"v{k}"] = random_video(rng, f"v{k}", max_cameras=3, max_q=3, depth=True)
    rates = tuple(sorted(int(r) for r in rng.choice(RATES[:4], size=int(rng.integers(1, 3)),
                                                    replace=False)))
    n_cls = int(rng.integers(1, 4))
    frac = rng.random(n_cls)
    frac /= frac.sum()
    pop = []
    for i in range(n_cls):
        vid = str(rng.choice(sorted(videos)))
        ws = list(dict.fromkeys(random_window(rng, videos[vid])
                                for _ in range(int(rng.integers(1, 3)))))
        pop.append(UserClass(vid, "1080p", float(rng.choice([700, 1500, 3000, 6000])),
                             tuple((w, 1 / len(ws)) for w in ws), float(frac[i])))
    storage = float(rng.choice([600, 1200, 2000, 4000, 8000]))
    return rates, pop, storage, videos


def outcome(fn, *args):
    from mvstream.client import Infeasible, UnspannableWindow
    try:
        return fn(*args).distortion
    except Infeasible:
        return "infeasible"
    except UnspannableWindow:
        return "unspannable"


def same(a, b, tol=1e-9) -> bool:
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    return abs(a - b) <= tol

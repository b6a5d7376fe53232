"""Optional static SVG figures.  matplotlib is imported lazily."""

import io

from .io import atomic_write


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "specproj"
    return plt, plt.figure(figsize=(6, 4))


def _save(plt, fig, path):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def line_plot(path, x, ys, xlabel, ylabel, logy=False, labels=None, markers=True):
    plt, fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    for k, y in enumerate(ys):
        ax.plot(x, y, marker="o" if markers else None, markersize=2, label=None if labels is None else labels[k])
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if labels is not None:
        ax.legend()
    fig.tight_layout()
    _save(plt, fig, path)


def bar_plot(path, categories, series, labels, xlabel, ylabel):
    plt, fig = _figure()
    ax = fig.add_subplot(1, 1, 1)
    width = 0.8 / len(series)
    for k, (vals, label) in enumerate(zip(series, labels)):
        ax.bar([i + k * width for i in range(len(categories))], vals, width, label=label)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(categories))])
    ax.set_xticklabels(categories)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    _save(plt, fig, path)

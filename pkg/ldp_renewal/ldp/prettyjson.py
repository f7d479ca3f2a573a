# Line-fitting renderer adapted from https://stackoverflow.com/a/56497521/104668
import math
from numbers import Integral, Real

import numpy as np

def prettyjson(obj, indent=2, maxlinelength=80):
    """Renders JSON content with indentation, packing lists into lines of at most `maxlinelength`.

    Only dicts, lists, tuples, numpy arrays and basic types are supported. Floats are written with
    17 significant digits and non-finite floats as the strings ``"+inf"``, ``"-inf"`` and ``"nan"``,
    so every document produced here is valid JSON and reproducible bit for bit."""
    items, _ = _render(obj, key="", islast=True, width=maxlinelength - indent, indent=indent)
    return _indent(items, indent, level=0)

def format_float(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return '%.17g' % value

def scalar2str(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, str):
        return '"' + obj.replace('\\', '\\\\').replace('"', '\\"') + '"'
    if isinstance(obj, (Integral, np.integer)):
        return str(int(obj))
    if isinstance(obj, (Real, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return format_float(value)
        return '"' + format_float(value) + '"'
    return '"' + str(obj) + '"'

def _render(obj, key, islast, width, indent):
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    prefix = "" if key == "" else key + ": "
    comma = "" if islast else ","
    if not isinstance(obj, (dict, list, tuple)):
        return [prefix + scalar2str(obj) + comma], True

    width = max(0, width)
    isdict = isinstance(obj, dict)
    keys = list(obj.keys()) if isdict else range(len(obj))
    opening, closing = ("{", "}") if isdict else ("[", "]")
    opening = prefix + opening
    closing = closing + comma

    children = []
    inline = True
    for i, k in enumerate(keys):
        child_key = scalar2str(str(k)) if isdict else ""
        rendered, child_inline = _render(obj[k], child_key, i == len(obj) - 1, width - indent, indent)
        children.extend(rendered)
        inline = inline and child_inline

    if inline:
        if isdict:
            # dicts go on one line only if everything fits, otherwise one entry per line
            if sum(len(c) for c in children) + len(children) - 1 <= width:
                children = [" ".join(children)]
            else:
                inline = False
        else:
            # lists are packed greedily
            lines, current = [], ""
            for child in children:
                candidate = child if not current else current + " " + child
                if len(candidate) > width and current:
                    lines.append(current)
                    current = child
                else:
                    current = candidate
            if current:
                lines.append(current)
            children = lines
            if len(children) > 1:
                inline = False

    if inline:
        body = children[0] if children else ""
        if len(opening) + len(body) + len(closing) <= width:
            return [opening + body + closing], True
        inline = False

    return [opening, children, closing], inline

def _indent(items, indent, level):
    res = ""
    pad = " " * (indent * level)
    for i, item in enumerate(items):
        if isinstance(item, list):
            res += _indent(item, indent, level + 1)
        elif level == 0 and i == len(items) - 1:
            res += pad + item
        else:
            res += pad + item + "\n"
    return res

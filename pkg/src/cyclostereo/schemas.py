"""Versioned JSON schemas for the report files the CLI emits.

Field names are part of the external contract; bump schema_version on
any breaking change.  Validation itself lives in the test suite (and any
consumer that wants it) to keep jsonschema out of the runtime deps.
"""

_NUMBER_OR_TAGGED = {
    # non-finite floats serialize as "inf"/"-inf"/null
    "oneOf": [{"type": "number"}, {"type": "string", "enum": ["inf", "-inf"]},
              {"type": "null"}]
}

_RUN = {
    "type": "object",
    "required": ["view", "side", "start", "end", "width"],
    "properties": {
        "view": {"enum": ["L", "R"]},
        "side": {"enum": ["L", "R"]},
        "hidden_from": {"enum": ["L", "R"]},
        "start": {"type": "integer"},
        "end": {"type": "integer"},
        "width": {"type": "integer"},
        "at_border": {"type": "boolean"},
    },
}

_DISCONTINUITY = {
    "type": "object",
    "required": ["view", "position", "jump"],
    "properties": {
        "view": {"enum": ["L", "R"]},
        "position": {"type": "integer"},
        "lo": {"type": "integer"},
        "hi": {"type": "integer"},
        "lo_d": {"type": "number"},
        "hi_d": {"type": "number"},
        "jump": {"type": "number"},
    },
}

VIOLATIONS_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "opaque_violations", "davinci_mismatches", "passes"],
    "properties": {
        "schema_version": {"const": 1},
        "passes": {"type": "boolean"},
        "opaque_violations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["e", "x", "disparities"],
                "properties": {
                    "e": {"type": "integer"},
                    "x": {"type": "number"},
                    "disparities": {"type": "array", "items": {"type": "number"}},
                },
            },
        },
        "davinci_mismatches": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind", "e", "delta"],
                "properties": {
                    "kind": {"enum": ["jump_width_mismatch", "unpaired_discontinuity",
                                       "unpaired_occlusion"]},
                    "e": {"type": "integer"},
                    "delta": {"type": "number"},
                    "discontinuity": {"type": "object"},
                    "occlusion": {"type": "object"},
                },
            },
        },
    },
}

VALIDATE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scene", "tolerances", "budgets", "counts",
                 "violations", "passes"],
    "properties": {
        "schema_version": {"const": 1},
        "scene": {"type": "string"},
        "tolerances": {
            "type": "object",
            "required": ["lrc_tol", "jump_threshold", "pixel_tol", "opaque_tol"],
            "properties": {k: {"type": "number"} for k in
                           ("lrc_tol", "jump_threshold", "pixel_tol", "opaque_tol")},
        },
        "budgets": {
            "type": "object",
            "required": ["opaque", "davinci"],
            "properties": {"opaque": {"type": "integer"}, "davinci": {"type": "integer"}},
        },
        "counts": {
            "type": "object",
            "required": ["opaque_violations", "davinci_mismatches",
                         "occlusion_runs", "discontinuities"],
            "properties": {k: {"type": "integer"} for k in
                           ("opaque_violations", "davinci_mismatches",
                            "occlusion_runs", "discontinuities")},
        },
        "violations": VIOLATIONS_SCHEMA,
        "passes": {"type": "boolean"},
    },
}

_BIAS_SIDE = {
    "type": "object",
    "required": ["mean_rel_bias", "min_rel_bias", "max_rel_bias", "histogram",
                 "extremum"],
    "properties": {
        "mean_rel_bias": {"type": "number"},
        "min_rel_bias": {"type": "number"},
        "max_rel_bias": {"type": "number"},
        "histogram": {
            "type": "object",
            "required": ["edges", "counts"],
            "properties": {
                "edges": {"type": "array", "items": {"type": "number"}},
                "counts": {"type": "array", "items": {"type": "integer"}},
            },
        },
        "extremum": {
            "type": "object",
            "required": ["e", "col", "rel_bias"],
            "properties": {
                "e": {"type": "integer"},
                "col": {"type": "integer"},
                "rel_bias": {"type": "number"},
            },
        },
    },
}

BIAS_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scene", "rig", "n_pixels", "left", "right",
                 "identity_residual"],
    "properties": {
        "schema_version": {"const": 1},
        "scene": {"type": "string"},
        "rig": {"type": "object"},
        "n_pixels": {"type": "integer"},
        "left": _BIAS_SIDE,
        "right": _BIAS_SIDE,
        "identity_residual": {
            "type": "object",
            "required": ["max_rel", "mean_rel"],
            "properties": {"max_rel": {"type": "number"},
                           "mean_rel": {"type": "number"}},
        },
    },
}

SLICE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scene", "descriptor", "window", "lines"],
    "properties": {
        "schema_version": {"const": 1},
        "scene": {"type": "string"},
        "descriptor": {"type": "string"},
        "window": {"type": "integer"},
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["e", "heatmap", "degenerate", "valid_fraction"],
                "properties": {
                    "e": {"type": "integer"},
                    "heatmap": {"type": "string"},
                    "degenerate": {"type": "boolean"},
                    "valid_fraction": {"type": "number"},
                    "homogeneous_columns": {"type": "integer"},
                    "ambiguous_columns": {"type": "integer"},
                    "gt_overlay": {"type": "boolean"},
                    "warning": {"type": "string"},
                },
            },
        },
    },
}

SOLVE_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "scene", "params", "label_counts",
                 "line_status", "outputs"],
    "properties": {
        "schema_version": {"const": 1},
        "scene": {"type": "string"},
        "params": {"type": "object"},
        "label_counts": {"type": "object"},
        "line_status": {"type": "object"},
        "outputs": {"type": "object"},
        "metrics": {"type": "object"},
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "height", "lines"],
    "properties": {
        "schema_version": {"const": 1},
        "height": {"type": "integer"},
        "lines": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["runs", "discontinuities"],
                "properties": {
                    "runs": {"type": "array", "items": _RUN},
                    "discontinuities": {"type": "array", "items": _DISCONTINUITY},
                },
            },
        },
    },
}

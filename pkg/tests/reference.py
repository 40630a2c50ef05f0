"""Frozen values from the independent oracles in ``oracles.py``.

FOUR_SITE is the target of the ``four_site`` fixture; REPLICATED_8 is
``make_family("logcosh_replicated", 8)``.  Moments come from adaptive
Gauss-Kronrod quadrature, EP values from the dense-grid moment-form EP, the
mode from a bracketed root of a five-point finite-difference gradient.
"""

FOUR_SITE = {
    "mean": 0.04646847461409174,
    "m2": 0.1767755264308906,
    "m3": 0.0010384467436811188,
    "m4": 0.09504670976009871,
    "m5": 0.001795455364467621,
    "m6": 0.08629320973564528,
    "log_z": -1.0705876663486706,
    "mu_ep": 0.046436803316320954,
    "v_ep": 0.17684556552062997,
    "mode": 0.043307251819053455,
    "curvature_at_mode": 5.783131493945308,
}

REPLICATED_8 = {
    "mean": 0.2637378320683598,
    "m2": 0.09594238242551793,
    "m3": -0.0018601574421011713,
    "m4": 0.02778643944938214,
    "m5": -0.0017547721449782691,
    "m6": 0.013522068572869987,
    "log_z": -2.1998287871371467,
    "mu_ep": 0.2637745815779388,
    "v_ep": 0.09579322014306656,
    "mode": 0.2740033397922328,
    "curvature_at_mode": 10.507380372336128,
}

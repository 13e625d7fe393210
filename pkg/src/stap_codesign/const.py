# coding=utf-8


class SOLVER_KIND():
    AM_DIRECT = "am-direct"
    QCQP = "qcqp"
    SDP = "sdp"
    CLS = "cls"

    ALL = [AM_DIRECT, QCQP, SDP, CLS]


class MULTIPLIER_MODE():
    ROOT = "root"
    ZERO = "zero"

    ALL = [ROOT, ZERO]


class TRACE_FORMAT():
    CSV = "csv"
    JSON = "json"

    ALL = [CSV, JSON]

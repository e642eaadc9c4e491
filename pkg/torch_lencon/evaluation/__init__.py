from torch_lencon.data.length import truncate_bytes
from torch_lencon.evaluation.rouge import rouge_n, rouge_l, lcs_length, score_document, RougeScores
from torch_lencon.evaluation.significance import permutation_test
from torch_lencon.evaluation.report import (
    EvalReport,
    LengthGroupReport,
    evaluate,
    length_report,
    write_length_histograms
)

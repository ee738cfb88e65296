from .config import ABLATIONS, ModelConfig, TrainConfig
from .forecast import Forecast, IncidenceMatrix, MetricReport, ModelOutput
from .params import ModelParams
from .series import Normalizer, SeriesTable, WindowBatch

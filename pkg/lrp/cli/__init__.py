from .config_file import parse_config, read_config_file
from .main import build_parser, main
from .outputs import OutputWriter, RunManifest
from .report import emit_report

"""
환경 설정
.env 파일과 환경변수에서 실행 기본값을 읽어옵니다.
"""

import os

from dotenv import load_dotenv

# .env 파일 로드
load_dotenv()

VERSION = os.getenv("PARTITION_MLE_VERSION", "0.1")
LOG_LEVEL = os.getenv("PARTITION_MLE_LOG_LEVEL", "WARNING").upper()

# IPS
DEFAULT_FLOAT_TOLERANCE = float(os.getenv("PARTITION_MLE_TOLERANCE", "1e-8"))
DEFAULT_EXACT_MAX_CYCLES = int(os.getenv("PARTITION_MLE_EXACT_MAX_CYCLES", "25"))
DEFAULT_FLOAT_MAX_CYCLES = int(os.getenv("PARTITION_MLE_FLOAT_MAX_CYCLES", "500000"))

# 반복 실험
DEFAULT_TRIALS = int(os.getenv("PARTITION_MLE_TRIALS", "20000"))
EXPERIMENT_WORKERS = int(os.getenv("PARTITION_MLE_WORKERS", "1"))
EXPERIMENT_CHUNK_SIZE = int(os.getenv("PARTITION_MLE_CHUNK_SIZE", "20000"))

# 탐색 한도
RIP_SEARCH_MAX_FACETS = int(os.getenv("PARTITION_MLE_RIP_MAX_FACETS", "8"))
GENERATOR_OUTPUT_CAP = int(os.getenv("PARTITION_MLE_GENERATOR_CAP", "10000"))

VERSION_HEADER = f"# partition-mle v{VERSION}"

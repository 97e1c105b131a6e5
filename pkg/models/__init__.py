# 분할 행렬 도메인 타입과 보고서 스키마

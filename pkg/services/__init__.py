# 분할 모형 서비스: 행렬, GRIP, IPS, MLE, 단계 트리, 계층 모형, TFP

# partition-mle 테스트

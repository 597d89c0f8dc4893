# header comment

@problemName commented
# between directives
@univariate true
@classLabel true x y
@data

0.5,0.25:x
# mid-data comment
-1e-3,2E2:y

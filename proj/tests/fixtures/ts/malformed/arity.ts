@problemName a
@dimension 2
@classLabel true A B
@data
1,2:A
